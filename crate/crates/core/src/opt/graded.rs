//! Graded-material optimization: density `phi` plus grading `chi` with `0 <= chi <= phi`.

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use super::single::{assemble_phase_rhs, step_single, PhaseStep};
use super::{
    assemble_phase_matrices, delta_phi, field_mean, interface_energy, project_unit_interval,
    DesignProblem, IterationRecord, Observer, OptConfig, PhaseMatrices, RunRecord, Termination,
    DESIGN_CG,
};
use crate::elasticity::ElasticProblem;
use crate::error::{Error, Result};
use crate::fem::element::ElementQuadrature;
use crate::fem::mesh::StructuredQuadMesh;
use crate::fem::solve::{pcg, ScalarSaddleSolver};
use crate::material::denergy_dchi_graded;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradedConfig {
    pub base: OptConfig,
    pub kappa_chi: f64,
    pub gamma_chi: f64,
    /// Uniform initial grading; `None` starts at `phi0`, the fully stiff state.
    pub chi0: Option<f64>,
}

impl GradedConfig {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        for (name, v) in [("kappa_chi", self.kappa_chi), ("gamma_chi", self.gamma_chi)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        let chi0 = self.initial_chi();
        if !(0.0..=self.base.phi0).contains(&chi0) {
            return Err(Error::invalid(format!(
                "chi0 must be in [0, phi0 = {}], got {chi0}",
                self.base.phi0
            )));
        }
        Ok(())
    }

    pub fn initial_chi(&self) -> f64 {
        self.chi0.unwrap_or(self.base.phi0)
    }
}

/// `gamma_chi \int N^T N` and `kappa_chi gamma_chi \int grad N^T grad N`.
pub fn assemble_chi_matrices(
    mesh: &StructuredQuadMesh,
    quad: &ElementQuadrature,
    cfg: &GradedConfig,
) -> Result<PhaseMatrices> {
    assemble_phase_matrices(mesh, quad, cfg.gamma_chi, cfg.kappa_chi, cfg.base.tau)
}

/// Pointwise clamp of `chi` onto `[0, phi]`.
pub fn project_chi(chi: &[f64], phi: &[f64]) -> Vec<f64> {
    chi.iter().zip(phi).map(|(&c, &p)| c.min(p).max(0.0)).collect()
}

/// `(1/|Omega|) \int chi`.
pub fn material_fraction(chi: &[f64], node_areas: &[f64]) -> f64 {
    field_mean(node_areas, chi)
}

/// Unprojected result of one graded step.
#[derive(Debug, Clone)]
pub struct GradedStep {
    pub phi: PhaseStep,
    pub chi: Vec<f64>,
    /// Forcing `\int N dE/dchi` of the grading equation.
    pub chi_forcing: Vec<f64>,
}

/// One staggered step: the density-multiplier subsystem and the independent
/// grading subsystem `(M/tau + K) chi* = M chi_n / tau + q_t`.
pub fn step_graded(
    elastic: &ElasticProblem,
    phi_mats: &PhaseMatrices,
    saddle: &ScalarSaddleSolver,
    chi_mats: &PhaseMatrices,
    m: f64,
    phi_n: &[f64],
    chi_n: &[f64],
    u_n: &[f64],
) -> Result<GradedStep> {
    let rhs = assemble_phase_rhs(elastic, phi_mats, phi_n, Some(chi_n), u_n);
    let phi = step_single(saddle, &rhs, m)?;

    let mat = *elastic.material();
    let spec = *elastic.spec();
    let chi_forcing = elastic.integrate_energy_term(phi_n, Some(chi_n), u_n, |phi, chi, eps| {
        denergy_dchi_graded(phi, chi.unwrap_or(phi), eps, &mat, &spec)
    });
    let mut chi_rhs = chi_mats.mass.mul_vec(chi_n);
    for (r, q) in chi_rhs.iter_mut().zip(&chi_forcing) {
        *r = *r / chi_mats.tau + q;
    }
    let chi = pcg(&chi_mats.step, &chi_rhs, Some(chi_n), &DESIGN_CG)?.solution;
    Ok(GradedStep {
        phi,
        chi,
        chi_forcing,
    })
}

/// Cached operators for repeated graded steps.
#[derive(Debug, Clone)]
pub struct GradedOptimizer {
    elastic: ElasticProblem,
    phi_mats: PhaseMatrices,
    chi_mats: PhaseMatrices,
    saddle: ScalarSaddleSolver,
    cfg: GradedConfig,
}

impl GradedOptimizer {
    pub fn new(problem: &DesignProblem, cfg: &GradedConfig) -> Result<Self> {
        cfg.validate()?;
        let elastic = problem.elastic()?;
        let quad = elastic.quadrature();
        let phi_mats = assemble_phase_matrices(
            &problem.mesh,
            quad,
            problem.interpolation.gamma_phi,
            cfg.base.kappa_phi,
            cfg.base.tau,
        )?;
        let chi_mats = assemble_chi_matrices(&problem.mesh, quad, cfg)?;
        let saddle =
            ScalarSaddleSolver::new(phi_mats.step.clone(), phi_mats.node_areas.clone(), DESIGN_CG)?;
        Ok(Self {
            elastic,
            phi_mats,
            chi_mats,
            saddle,
            cfg: *cfg,
        })
    }

    pub fn elastic(&self) -> &ElasticProblem {
        &self.elastic
    }

    pub fn phi_matrices(&self) -> &PhaseMatrices {
        &self.phi_mats
    }

    pub fn chi_matrices(&self) -> &PhaseMatrices {
        &self.chi_mats
    }

    pub fn config(&self) -> &GradedConfig {
        &self.cfg
    }

    /// Compliance plus the density and grading interface energies.
    pub fn objective(&self, phi: &[f64], chi: &[f64], compliance: f64) -> f64 {
        compliance
            + interface_energy(&self.phi_mats, self.elastic.mesh(), self.elastic.quadrature(), phi)
            + 0.5 * self.chi_mats.stiffness.quadratic_form(chi)
    }

    pub fn step(&self, phi_n: &[f64], chi_n: &[f64], u_n: &[f64]) -> Result<GradedStep> {
        step_graded(
            &self.elastic,
            &self.phi_mats,
            &self.saddle,
            &self.chi_mats,
            self.cfg.base.m,
            phi_n,
            chi_n,
            u_n,
        )
    }

    pub fn run(&self, observer: Option<&mut Observer<'_>>) -> RunRecord {
        let n = self.elastic.mesh().node_count();
        let phi = vec![self.cfg.base.phi0; n];
        let chi = vec![self.cfg.initial_chi(); n];
        self.run_from(phi, chi, observer)
    }

    pub fn run_from(
        &self,
        mut phi: Vec<f64>,
        mut chi: Vec<f64>,
        mut observer: Option<&mut Observer<'_>>,
    ) -> RunRecord {
        let base = &self.cfg.base;
        let mut rows = Vec::new();
        let mut termination = Termination::MaxIterations;
        let mut failure = None;

        for iter in 1..=base.max_iter {
            let outcome = self.elastic.solve(&phi, Some(&chi)).and_then(|state| {
                let step = self.step(&phi, &chi, &state.u)?;
                Ok((state, step))
            });
            let (state, step) = match outcome {
                Ok(v) => v,
                Err(e) => {
                    warn!("iteration {iter}: {e}");
                    termination = Termination::SolverFailure;
                    failure = Some(e.to_string());
                    break;
                }
            };
            let next_phi = project_unit_interval(&step.phi.phi);
            let next_chi = project_chi(&step.chi, &next_phi);
            let d_phi = delta_phi(&next_phi, &phi);
            let d_chi = delta_phi(&next_chi, &chi);
            let row = IterationRecord {
                iter,
                compliance: state.compliance,
                objective: self.objective(&phi, &chi, state.compliance),
                volume: field_mean(&self.phi_mats.node_areas, &next_phi),
                m_chi: material_fraction(&next_chi, &self.phi_mats.node_areas),
                delta_phi: d_phi,
                delta_chi: Some(d_chi),
                volume_residual: step.phi.volume_residual,
                lambda: step.phi.lambda,
                chi_forcing_max: Some(step.chi_forcing.iter().fold(0.0, |m: f64, q| m.max(q.abs()))),
            };
            debug!(
                "iter {iter}: compliance {:.6} delta_phi {d_phi:.3e} delta_chi {d_chi:.3e}",
                state.compliance
            );
            if let Some(obs) = observer.as_deref_mut() {
                obs(&row, &next_phi, Some(&next_chi));
            }
            rows.push(row);
            phi = next_phi;
            chi = next_chi;
            if d_phi < base.tol && d_chi < base.tol {
                termination = Termination::Converged;
                break;
            }
        }

        let final_compliance = if failure.is_none() {
            match self.elastic.solve(&phi, Some(&chi)) {
                Ok(s) => s.compliance,
                Err(e) => {
                    termination = Termination::SolverFailure;
                    failure = Some(e.to_string());
                    f64::NAN
                }
            }
        } else {
            f64::NAN
        };
        info!(
            "graded run: {:?} after {} iterations, compliance {final_compliance:.4}",
            termination,
            rows.len()
        );
        RunRecord {
            rows,
            termination,
            final_compliance,
            phi,
            chi: Some(chi),
            failure,
        }
    }
}

/// Run the graded optimization from uniform initial fields.
pub fn run_graded(problem: &DesignProblem, cfg: &GradedConfig) -> Result<RunRecord> {
    let opt = GradedOptimizer::new(problem, cfg)?;
    let record = opt.run(None);
    if record.rows.is_empty() {
        if let Some(msg) = &record.failure {
            return Err(Error::invalid(format!("run aborted before the first step: {msg}")));
        }
    }
    Ok(record)
}
