//! Single-material optimization: density field `phi` only.

use log::{debug, info, warn};

use super::{
    assemble_phase_matrices, delta_phi, field_mean, interface_energy, project_unit_interval,
    DesignProblem, IterationRecord, Observer, OptConfig, PhaseMatrices, RunRecord, Termination,
    DESIGN_CG,
};
use crate::elasticity::ElasticProblem;
use crate::error::{Error, Result};
use crate::fem::element::gather;
use crate::fem::solve::ScalarSaddleSolver;
use crate::fem::sparse::dot;
use crate::material::{denergy_dphi_graded, denergy_dphi_single, double_well};

/// Right-hand side of one density step:
/// `M phi_n / tau + \int N dE/dphi - (kappa/gamma) \int N psi'(phi_n)`,
/// with the energy derivative taken on `(phi_n, chi_n, u_n)` (`chi_n = None`
/// for the single-material law).
pub fn assemble_phase_rhs(
    elastic: &ElasticProblem,
    mats: &PhaseMatrices,
    phi_n: &[f64],
    chi_n: Option<&[f64]>,
    u_n: &[f64],
) -> Vec<f64> {
    let mat = *elastic.material();
    let spec = *elastic.spec();
    let q_s = elastic.integrate_energy_term(phi_n, chi_n, u_n, |phi, chi, eps| match chi {
        Some(chi) => denergy_dphi_graded(phi, chi, eps, &mat, &spec),
        None => denergy_dphi_single(phi, eps, &mat, &spec),
    });
    let mesh = elastic.mesh();
    let elements = mesh.elements();
    let well_weight = mats.kappa / mats.gamma;
    let q_psi = elastic.quadrature().integrate_against_shapes(mesh, |e, qp| {
        -well_weight * double_well(qp.interpolate(gather(phi_n, &elements[e]))).1
    });
    let mut rhs = mats.mass.mul_vec(phi_n);
    for ((r, s), p) in rhs.iter_mut().zip(&q_s).zip(&q_psi) {
        *r = *r / mats.tau + s + p;
    }
    rhs
}

/// Unprojected result of one density step.
#[derive(Debug, Clone)]
pub struct PhaseStep {
    pub phi: Vec<f64>,
    pub lambda: f64,
    /// Relative violation of `\int phi = m |Omega|`.
    pub volume_residual: f64,
}

/// Solve `[A b; b^T 0] [phi; lambda] = [rhs; m |Omega|]` for one step.
pub fn step_single(saddle: &ScalarSaddleSolver, rhs: &[f64], m: f64) -> Result<PhaseStep> {
    let target = m * saddle.coupling().iter().sum::<f64>();
    let (phi, lambda) = saddle.solve(rhs, target)?;
    let volume_residual = (dot(saddle.coupling(), &phi) - target).abs() / target.abs();
    Ok(PhaseStep {
        phi,
        lambda,
        volume_residual,
    })
}

/// Cached operators for repeated single-material steps.
#[derive(Debug, Clone)]
pub struct SingleOptimizer {
    pub(crate) elastic: ElasticProblem,
    pub(crate) mats: PhaseMatrices,
    pub(crate) saddle: ScalarSaddleSolver,
    pub(crate) cfg: OptConfig,
}

impl SingleOptimizer {
    pub fn new(problem: &DesignProblem, cfg: &OptConfig) -> Result<Self> {
        cfg.validate()?;
        let elastic = problem.elastic()?;
        let mats = assemble_phase_matrices(
            &problem.mesh,
            elastic.quadrature(),
            problem.interpolation.gamma_phi,
            cfg.kappa_phi,
            cfg.tau,
        )?;
        let saddle = ScalarSaddleSolver::new(mats.step.clone(), mats.node_areas.clone(), DESIGN_CG)?;
        Ok(Self {
            elastic,
            mats,
            saddle,
            cfg: *cfg,
        })
    }

    pub fn elastic(&self) -> &ElasticProblem {
        &self.elastic
    }

    pub fn matrices(&self) -> &PhaseMatrices {
        &self.mats
    }

    pub fn config(&self) -> &OptConfig {
        &self.cfg
    }

    /// Discrete objective: compliance plus interface energy.
    pub fn objective(&self, phi: &[f64], compliance: f64) -> f64 {
        compliance + interface_energy(&self.mats, self.elastic.mesh(), self.elastic.quadrature(), phi)
    }

    pub fn step(&self, phi_n: &[f64], u_n: &[f64]) -> Result<PhaseStep> {
        let rhs = assemble_phase_rhs(&self.elastic, &self.mats, phi_n, None, u_n);
        step_single(&self.saddle, &rhs, self.cfg.m)
    }

    pub fn run(&self, observer: Option<&mut Observer<'_>>) -> RunRecord {
        let n = self.elastic.mesh().node_count();
        self.run_from(vec![self.cfg.phi0; n], observer)
    }

    pub fn run_from(&self, mut phi: Vec<f64>, mut observer: Option<&mut Observer<'_>>) -> RunRecord {
        let mut rows = Vec::new();
        let mut termination = Termination::MaxIterations;
        let mut failure = None;

        for iter in 1..=self.cfg.max_iter {
            let outcome = self.elastic.solve(&phi, None).and_then(|state| {
                let step = self.step(&phi, &state.u)?;
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
            let next = project_unit_interval(&step.phi);
            let d = delta_phi(&next, &phi);
            let volume = field_mean(&self.mats.node_areas, &next);
            let row = IterationRecord {
                iter,
                compliance: state.compliance,
                objective: self.objective(&phi, state.compliance),
                volume,
                m_chi: volume,
                delta_phi: d,
                delta_chi: None,
                volume_residual: step.volume_residual,
                lambda: step.lambda,
                chi_forcing_max: None,
            };
            debug!("iter {iter}: compliance {:.6} delta_phi {d:.3e}", state.compliance);
            if let Some(obs) = observer.as_deref_mut() {
                obs(&row, &next, None);
            }
            rows.push(row);
            phi = next;
            if d < self.cfg.tol {
                termination = Termination::Converged;
                break;
            }
        }

        let final_compliance = if failure.is_none() {
            match self.elastic.solve(&phi, None) {
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
            "single-material run: {:?} after {} iterations, compliance {final_compliance:.4}",
            termination,
            rows.len()
        );
        RunRecord {
            rows,
            termination,
            final_compliance,
            phi,
            chi: None,
            failure,
        }
    }
}

/// Run the single-material optimization from the uniform initial density.
pub fn run_single(problem: &DesignProblem, cfg: &OptConfig) -> Result<RunRecord> {
    let opt = SingleOptimizer::new(problem, cfg)?;
    let record = opt.run(None);
    if record.rows.is_empty() {
        if let Some(msg) = &record.failure {
            return Err(Error::invalid(format!("run aborted before the first step: {msg}")));
        }
    }
    Ok(record)
}
