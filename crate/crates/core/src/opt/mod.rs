//! Allen-Cahn gradient-flow optimizers with a scalar volume multiplier.
//!
//! Each iteration solves the state problem on the current design, then takes one
//! semi-implicit pseudo-time step of the design fields: mass and gradient terms
//! are implicit, the energy and double-well forcing are lagged at the previous
//! iterate. The step is followed by a pointwise projection onto the admissible box.

pub mod graded;
pub mod single;

use serde::{Deserialize, Serialize};

use crate::elasticity::{BoundaryConditions, ElasticProblem};
use crate::error::{Error, Result};
use crate::fem::element::{gather, ElementQuadrature};
use crate::fem::mesh::StructuredQuadMesh;
use crate::fem::solve::CgOptions;
use crate::fem::sparse::{dot, norm2, SparseSymmetricSystem};
use crate::material::{double_well, IsotropicElasticity, InterpolationSpec};

pub use graded::{
    assemble_chi_matrices, material_fraction, project_chi, run_graded, step_graded, GradedConfig,
    GradedOptimizer,
};
pub use single::{assemble_phase_rhs, run_single, step_single, SingleOptimizer};

/// Tolerance for the design-field solves. These systems are dominated by
/// `M / tau` and converge in a few dozen iterations even at this level.
pub(crate) const DESIGN_CG: CgOptions = CgOptions {
    relative_tolerance: 1e-12,
    max_iter_factor: 10,
};

/// Everything that defines the physical problem apart from optimizer settings.
#[derive(Debug, Clone)]
pub struct DesignProblem {
    pub mesh: StructuredQuadMesh,
    pub material: IsotropicElasticity,
    pub interpolation: InterpolationSpec,
    pub bc: BoundaryConditions,
}

impl DesignProblem {
    pub fn elastic(&self) -> Result<ElasticProblem> {
        ElasticProblem::new(&self.mesh, &self.material, &self.interpolation, &self.bc)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptConfig {
    /// Target volume fraction.
    pub m: f64,
    pub kappa_phi: f64,
    /// Pseudo-time step.
    pub tau: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Uniform initial density.
    pub phi0: f64,
}

impl Default for OptConfig {
    fn default() -> Self {
        Self {
            m: 0.5,
            kappa_phi: 1.0,
            tau: 1e-6,
            tol: 0.01,
            max_iter: 1000,
            phi0: 0.5,
        }
    }
}

impl OptConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0 && self.m <= 1.0) {
            return Err(Error::invalid(format!("volume fraction m must be in (0, 1], got {}", self.m)));
        }
        for (name, v) in [("kappa_phi", self.kappa_phi), ("tau", self.tau), ("tol", self.tol)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.phi0) {
            return Err(Error::invalid(format!("phi0 must be in [0, 1], got {}", self.phi0)));
        }
        Ok(())
    }
}

/// Mass, gradient and step matrices of one design field on the shared mesh.
#[derive(Debug, Clone)]
pub struct PhaseMatrices {
    /// `gamma \int N^T N`
    pub mass: SparseSymmetricSystem,
    /// `kappa gamma \int grad N^T grad N`
    pub stiffness: SparseSymmetricSystem,
    /// `mass / tau + stiffness`, the operator of one pseudo-time step.
    pub step: SparseSymmetricSystem,
    /// `\int N_i`, the nodal areas.
    pub node_areas: Vec<f64>,
    pub gamma: f64,
    pub kappa: f64,
    pub tau: f64,
}

impl PhaseMatrices {
    /// Multiplier column in the `tau`-scaled form of the step system.
    pub fn lambda_column(&self) -> Vec<f64> {
        self.node_areas.iter().map(|a| self.tau * a).collect()
    }
}

pub fn assemble_phase_matrices(
    mesh: &StructuredQuadMesh,
    quad: &ElementQuadrature,
    gamma: f64,
    kappa: f64,
    tau: f64,
) -> Result<PhaseMatrices> {
    for (name, v) in [("gamma", gamma), ("kappa", kappa), ("tau", tau)] {
        if !(v > 0.0) {
            return Err(Error::invalid(format!("{name} must be positive, got {v}")));
        }
    }
    let mut mass = SparseSymmetricSystem::with_mesh_pattern(mesh, 1);
    let mut stiffness = SparseSymmetricSystem::with_mesh_pattern(mesh, 1);
    let mut me = [0.0; 16];
    let mut ke = [0.0; 16];
    for (e, conn) in mesh.elements().iter().enumerate() {
        me.iter_mut().for_each(|v| *v = 0.0);
        ke.iter_mut().for_each(|v| *v = 0.0);
        for qp in quad.points(e) {
            for a in 0..4 {
                for b in 0..4 {
                    me[4 * a + b] += gamma * qp.n[a] * qp.n[b] * qp.weight;
                    let g = qp.grad[a][0] * qp.grad[b][0] + qp.grad[a][1] * qp.grad[b][1];
                    ke[4 * a + b] += kappa * gamma * g * qp.weight;
                }
            }
        }
        mass.add_block(conn, &me);
        stiffness.add_block(conn, &ke);
    }
    let step = mass.linear_combination(1.0 / tau, &stiffness, 1.0)?;
    let node_areas = quad.integrate_against_shapes(mesh, |_, _| 1.0);
    Ok(PhaseMatrices {
        mass,
        stiffness,
        step,
        node_areas,
        gamma,
        kappa,
        tau,
    })
}

/// Pointwise clamp onto `[0, 1]`.
pub fn project_unit_interval(phi: &[f64]) -> Vec<f64> {
    phi.iter().map(|v| v.clamp(0.0, 1.0)).collect()
}

/// Relative nodal 2-norm change `|new - old| / |old|`, `+inf` when `old = 0`.
pub fn delta_phi(new: &[f64], old: &[f64]) -> f64 {
    let denom = norm2(old);
    if denom == 0.0 {
        return f64::INFINITY;
    }
    let diff: f64 = new.iter().zip(old).map(|(a, b)| (a - b) * (a - b)).sum();
    diff.sqrt() / denom
}

/// `\int phi^2 (1 - phi)^2` with the design quadrature.
pub(crate) fn double_well_integral(mesh: &StructuredQuadMesh, quad: &ElementQuadrature, phi: &[f64]) -> f64 {
    let elements = mesh.elements();
    quad.integrate(mesh, |e, qp| double_well(qp.interpolate(gather(phi, &elements[e]))).0)
}

/// Interface energy `kappa \int [gamma/2 |grad phi|^2 + psi(phi)/gamma]`.
pub(crate) fn interface_energy(
    mats: &PhaseMatrices,
    mesh: &StructuredQuadMesh,
    quad: &ElementQuadrature,
    phi: &[f64],
) -> f64 {
    0.5 * mats.stiffness.quadratic_form(phi) + mats.kappa / mats.gamma * double_well_integral(mesh, quad, phi)
}

/// Mean of a nodal field weighted by the nodal areas.
pub(crate) fn field_mean(node_areas: &[f64], field: &[f64]) -> f64 {
    dot(node_areas, field) / node_areas.iter().sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based iteration number.
    pub iter: usize,
    /// Compliance of the state solved on the design entering this iteration.
    pub compliance: f64,
    /// Discrete objective (compliance plus interface energies) on that design.
    pub objective: f64,
    /// Mean density after projection.
    pub volume: f64,
    /// Mean grading after projection; the mean density in single-material runs.
    pub m_chi: f64,
    pub delta_phi: f64,
    pub delta_chi: Option<f64>,
    /// `|b^T phi* - m |Omega|| / (m |Omega|)` before projection.
    pub volume_residual: f64,
    pub lambda: f64,
    /// Largest magnitude in the grading forcing vector; `None` without grading.
    pub chi_forcing_max: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
    SolverFailure,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub rows: Vec<IterationRecord>,
    pub termination: Termination,
    /// Compliance of the state on the final design.
    pub final_compliance: f64,
    pub phi: Vec<f64>,
    pub chi: Option<Vec<f64>>,
    /// Message of the error that aborted the run, if any.
    pub failure: Option<String>,
}

impl RunRecord {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    pub fn iterations(&self) -> usize {
        self.rows.len()
    }

    pub fn final_volume(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.volume)
    }

    pub fn final_m_chi(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.m_chi)
    }
}

/// Per-iteration callback: the record and the projected fields after the step.
pub type Observer<'a> = dyn FnMut(&IterationRecord, &[f64], Option<&[f64]>) + 'a;

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_square() -> (StructuredQuadMesh, ElementQuadrature) {
        let mesh = StructuredQuadMesh::new(1, 1, 1.0, 1.0).unwrap();
        let quad = ElementQuadrature::gauss_2x2(&mesh).unwrap();
        (mesh, quad)
    }

    #[test]
    fn unit_square_mass_matrix() {
        let (mesh, quad) = unit_square();
        let mats = assemble_phase_matrices(&mesh, &quad, 1.0, 1.0, 1.0).unwrap();
        // corners ordered ccw: neighbours 1/18, opposite 1/36
        let expected = [
            [1.0 / 9.0, 1.0 / 18.0, 1.0 / 36.0, 1.0 / 18.0],
            [1.0 / 18.0, 1.0 / 9.0, 1.0 / 18.0, 1.0 / 36.0],
            [1.0 / 36.0, 1.0 / 18.0, 1.0 / 9.0, 1.0 / 18.0],
            [1.0 / 18.0, 1.0 / 36.0, 1.0 / 18.0, 1.0 / 9.0],
        ];
        let local = [0, 1, 3, 2];
        for a in 0..4 {
            for b in 0..4 {
                let v = mats.mass.get(local[a], local[b]);
                assert!((v - expected[a][b]).abs() < 1e-15, "({a},{b}) {v}");
            }
        }
        assert!((mats.mass.total() - 1.0).abs() < 1e-15);
        assert!(mats.node_areas.iter().all(|&a| (a - 0.25).abs() < 1e-15));
    }

    #[test]
    fn mass_total_and_constant_null_space() {
        let mesh = StructuredQuadMesh::new(12, 6, 2.0, 1.0).unwrap();
        let quad = ElementQuadrature::gauss_2x2(&mesh).unwrap();
        let mats = assemble_phase_matrices(&mesh, &quad, 0.02, 4.0, 1e-6).unwrap();
        assert!((mats.mass.total() - 0.02 * 2.0).abs() < 1e-14);
        let k1 = mats.stiffness.mul_vec(&vec![1.0; mesh.node_count()]);
        assert!(k1.iter().all(|v| v.abs() < 1e-12));
        let col = mats.lambda_column();
        assert!((col.iter().sum::<f64>() - 2e-6).abs() < 1e-18);
    }

    #[test]
    fn rejects_nonpositive_parameters() {
        let (mesh, quad) = unit_square();
        assert!(assemble_phase_matrices(&mesh, &quad, 0.0, 1.0, 1.0).is_err());
        assert!(assemble_phase_matrices(&mesh, &quad, 1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn clamp_examples() {
        assert_eq!(project_unit_interval(&[1.2, -0.1, 0.3]), vec![1.0, 0.0, 0.3]);
    }

    #[test]
    fn delta_examples() {
        let old = vec![1.0; 7];
        let new = vec![1.1; 7];
        assert!((delta_phi(&new, &old) - 0.1).abs() < 1e-12);
        assert_eq!(delta_phi(&old, &old), 0.0);
        assert_eq!(delta_phi(&new, &[0.0; 7]), f64::INFINITY);
    }

    #[test]
    fn config_validation() {
        assert!(OptConfig::default().validate().is_ok());
        assert!(OptConfig { m: 1.5, ..Default::default() }.validate().is_err());
        assert!(OptConfig { tau: 0.0, ..Default::default() }.validate().is_err());
        assert!(OptConfig { max_iter: 0, ..Default::default() }.validate().is_err());
    }

    proptest! {
        #[test]
        fn clamp_is_idempotent_and_non_expansive(
            a in proptest::collection::vec(-2.0f64..3.0, 1..40),
            shift in proptest::collection::vec(-1.0f64..1.0, 40),
        ) {
            let b: Vec<f64> = a.iter().zip(&shift).map(|(x, s)| x + s).collect();
            let pa = project_unit_interval(&a);
            let pb = project_unit_interval(&b);
            prop_assert_eq!(project_unit_interval(&pa), pa.clone());
            let before = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            let after = pa.iter().zip(&pb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            prop_assert!(after <= before);
        }
    }
}
