//! Linear-elastic state problem on the current design fields.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::cholesky::{reverse_cuthill_mckee, EnvelopeCholesky};
use crate::fem::element::{ElementQuadrature, QuadPoint};
use crate::fem::mesh::{BoundaryEdge, StructuredQuadMesh};
use crate::fem::quadrature::gauss_legendre;
use crate::fem::sparse::{dot, norm2, SparseSymmetricSystem};
use crate::material::{IsotropicElasticity, InterpolationSpec, Strain};

/// Residual target for state solves, relative to the reduced right-hand side.
pub const STATE_RELATIVE_TOLERANCE: f64 = 1e-8;
/// Residual accepted when iterative refinement stops improving. Strongly graded
/// designs (void stiffness `gamma^2 / beta` of the bulk) can be too ill-conditioned
/// for the tolerance above in double precision.
pub const STATE_RESIDUAL_FLOOR: f64 = 1e-6;
const MAX_REFINEMENT_STEPS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    X,
    Y,
}

impl Component {
    pub fn index(self) -> usize {
        match self {
            Component::X => 0,
            Component::Y => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirichletCondition {
    pub node: usize,
    pub component: Component,
    pub value: f64,
}

/// Constant traction `g` (N/mm) on one boundary edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeumannLoad {
    pub edge: BoundaryEdge,
    pub traction: [f64; 2],
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundaryConditions {
    pub dirichlet: Vec<DirichletCondition>,
    pub neumann: Vec<NeumannLoad>,
}

impl BoundaryConditions {
    pub fn validate(&self, mesh: &StructuredQuadMesh) -> Result<()> {
        if self.dirichlet.is_empty() {
            return Err(Error::invalid("at least one Dirichlet condition is required"));
        }
        if let Some(d) = self.dirichlet.iter().find(|d| d.node >= mesh.node_count()) {
            return Err(Error::invalid(format!("Dirichlet node {} is not in the mesh", d.node)));
        }
        for load in &self.neumann {
            let mut key = load.edge.nodes;
            key.sort_unstable();
            let on_boundary = mesh.boundary_edges().iter().any(|e| {
                let mut k = e.nodes;
                k.sort_unstable();
                k == key
            });
            if !on_boundary {
                return Err(Error::invalid(format!(
                    "Neumann edge {:?} is not a boundary edge",
                    load.edge.nodes
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct StateSolution {
    /// Interleaved nodal displacements `[u_x0, u_y0, u_x1, ...]` (mm).
    pub u: Vec<f64>,
    /// External work `f^T u` (N mm).
    pub compliance: f64,
}

/// Stiffness multiple of `C_bulk` at a quadrature point.
fn point_scale(spec: &InterpolationSpec, phi: f64, chi: Option<f64>) -> f64 {
    match chi {
        Some(chi) => spec.graded_scale(phi, chi),
        None => spec.single_scale(phi),
    }
}

fn check_fields(mesh: &StructuredQuadMesh, phi: &[f64], chi: Option<&[f64]>) -> Result<()> {
    let n = mesh.node_count();
    if phi.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: phi.len(),
        });
    }
    if let Some(chi) = chi {
        if chi.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: chi.len(),
            });
        }
        if let Some(i) = (0..n).find(|&i| chi[i] > phi[i]) {
            return Err(Error::invalid(format!(
                "grading {} exceeds density {} at node {i}",
                chi[i], phi[i]
            )));
        }
    }
    Ok(())
}

/// Global stiffness `K = \int B^T C(phi, chi) B` with `C` evaluated at each
/// quadrature point from the interpolated nodal fields. `chi = None` selects the
/// single-material law.
pub fn assemble_stiffness(
    mesh: &StructuredQuadMesh,
    quad: &ElementQuadrature,
    phi: &[f64],
    chi: Option<&[f64]>,
    mat: &IsotropicElasticity,
    spec: &InterpolationSpec,
) -> Result<SparseSymmetricSystem> {
    check_fields(mesh, phi, chi)?;
    let mut k = SparseSymmetricSystem::with_mesh_pattern(mesh, 2);
    let (lam, mu) = (mat.lambda, mat.mu);
    let mut block = [0.0; 64];
    for (e, conn) in mesh.elements().iter().enumerate() {
        block.iter_mut().for_each(|v| *v = 0.0);
        let phi_e = crate::fem::element::gather(phi, conn);
        let chi_e = chi.map(|c| crate::fem::element::gather(c, conn));
        for qp in quad.points(e) {
            let s = point_scale(spec, qp.interpolate(phi_e), chi_e.map(|c| qp.interpolate(c)));
            let w = s * qp.weight;
            let (l, m) = (lam * w, mu * w);
            for a in 0..4 {
                let [ax, ay] = qp.grad[a];
                for b in 0..4 {
                    let [bx, by] = qp.grad[b];
                    let r0 = 2 * a * 8 + 2 * b;
                    let r1 = r0 + 8;
                    block[r0] += (l + 2.0 * m) * ax * bx + m * ay * by;
                    block[r0 + 1] += l * ax * by + m * ay * bx;
                    block[r1] += l * ay * bx + m * ax * by;
                    block[r1 + 1] += (l + 2.0 * m) * ay * by + m * ax * bx;
                }
            }
        }
        let dofs = [
            2 * conn[0],
            2 * conn[0] + 1,
            2 * conn[1],
            2 * conn[1] + 1,
            2 * conn[2],
            2 * conn[2] + 1,
            2 * conn[3],
            2 * conn[3] + 1,
        ];
        k.add_block(&dofs, &block);
    }
    Ok(k)
}

/// Consistent load vector `f = \int_{Gamma_N} N^T g` (2-point Gauss per edge).
pub fn assemble_load(mesh: &StructuredQuadMesh, bc: &BoundaryConditions) -> Vec<f64> {
    let mut f = vec![0.0; 2 * mesh.node_count()];
    let (xs, ws) = gauss_legendre(2);
    for load in &bc.neumann {
        let len = mesh.edge_length(&load.edge);
        let [a, b] = load.edge.nodes;
        for (s, w) in xs.iter().zip(&ws) {
            let na = 0.5 * (1.0 - s);
            let nb = 0.5 * (1.0 + s);
            let jw = 0.5 * len * w;
            for c in 0..2 {
                f[2 * a + c] += na * load.traction[c] * jw;
                f[2 * b + c] += nb * load.traction[c] * jw;
            }
        }
    }
    f
}

/// Strain at a quadrature point from interleaved nodal displacements.
#[inline]
pub fn strain_at(u: &[f64], conn: &[usize; 4], qp: &QuadPoint) -> Strain {
    let mut eps = Strain::default();
    for a in 0..4 {
        let (ux, uy) = (u[2 * conn[a]], u[2 * conn[a] + 1]);
        let [gx, gy] = qp.grad[a];
        eps.xx += gx * ux;
        eps.yy += gy * uy;
        eps.xy += 0.5 * (gy * ux + gx * uy);
    }
    eps
}

/// State problem with everything that does not depend on the design cached.
#[derive(Debug, Clone)]
pub struct ElasticProblem {
    mesh: StructuredQuadMesh,
    quad: ElementQuadrature,
    material: IsotropicElasticity,
    spec: InterpolationSpec,
    load: Vec<f64>,
    prescribed: Vec<Option<f64>>,
    free: Vec<usize>,
    ordering: Vec<usize>,
}

impl ElasticProblem {
    pub fn new(
        mesh: &StructuredQuadMesh,
        material: &IsotropicElasticity,
        spec: &InterpolationSpec,
        bc: &BoundaryConditions,
    ) -> Result<Self> {
        bc.validate(mesh)?;
        spec.validate()?;
        let quad = ElementQuadrature::gauss_2x2(mesh)?;
        let ndof = 2 * mesh.node_count();
        let mut prescribed = vec![None; ndof];
        for d in &bc.dirichlet {
            prescribed[2 * d.node + d.component.index()] = Some(d.value);
        }
        let free: Vec<usize> = (0..ndof).filter(|&i| prescribed[i].is_none()).collect();
        let pattern = SparseSymmetricSystem::with_mesh_pattern(mesh, 2);
        let (reduced, _) = pattern.split_free(&free);
        let ordering = reverse_cuthill_mckee(&reduced);
        Ok(Self {
            mesh: mesh.clone(),
            quad,
            material: *material,
            spec: *spec,
            load: assemble_load(mesh, bc),
            prescribed,
            free,
            ordering,
        })
    }

    pub fn mesh(&self) -> &StructuredQuadMesh {
        &self.mesh
    }

    pub fn quadrature(&self) -> &ElementQuadrature {
        &self.quad
    }

    pub fn material(&self) -> &IsotropicElasticity {
        &self.material
    }

    pub fn spec(&self) -> &InterpolationSpec {
        &self.spec
    }

    pub fn load(&self) -> &[f64] {
        &self.load
    }

    pub fn stiffness(&self, phi: &[f64], chi: Option<&[f64]>) -> Result<SparseSymmetricSystem> {
        assemble_stiffness(&self.mesh, &self.quad, phi, chi, &self.material, &self.spec)
    }

    pub fn solve(&self, phi: &[f64], chi: Option<&[f64]>) -> Result<StateSolution> {
        let k = self.stiffness(phi, chi)?;
        let (kff, coupling) = k.split_free(&self.free);
        let rhs: Vec<f64> = self
            .free
            .iter()
            .zip(&coupling)
            .map(|(&i, fixed)| {
                self.load[i]
                    - fixed
                        .iter()
                        .map(|&(c, v)| v * self.prescribed[c].unwrap_or(0.0))
                        .sum::<f64>()
            })
            .collect();

        let mut u_free = vec![0.0; self.free.len()];
        let rhs_norm = norm2(&rhs);
        if rhs_norm > 0.0 {
            let chol = EnvelopeCholesky::factor_with_ordering(&kff, self.ordering.clone())?;
            u_free = chol.solve(&rhs);
            let mut rel = f64::INFINITY;
            let mut steps = 0;
            loop {
                let ku = kff.mul_vec(&u_free);
                let r: Vec<f64> = rhs.iter().zip(&ku).map(|(b, a)| b - a).collect();
                let prev = rel;
                rel = norm2(&r) / rhs_norm;
                if rel <= STATE_RELATIVE_TOLERANCE {
                    break;
                }
                // refinement in working precision cannot beat the conditioning floor
                if steps == MAX_REFINEMENT_STEPS || rel > 0.5 * prev {
                    if rel <= STATE_RESIDUAL_FLOOR {
                        warn!("state residual stalled at {rel:.2e} after {steps} refinement steps");
                        break;
                    }
                    return Err(Error::SolverFailure {
                        iterations: steps,
                        residual: rel,
                    });
                }
                let du = chol.solve(&r);
                u_free.iter_mut().zip(&du).for_each(|(u, d)| *u += d);
                steps += 1;
            }
        }

        let mut u: Vec<f64> = self.prescribed.iter().map(|p| p.unwrap_or(0.0)).collect();
        for (&i, &v) in self.free.iter().zip(&u_free) {
            u[i] = v;
        }
        let compliance = dot(&self.load, &u);
        Ok(StateSolution { u, compliance })
    }

    /// `\int N_i g(phi, chi, eps) dx` for an energy-derivative integrand `g`.
    pub fn integrate_energy_term<F>(&self, phi: &[f64], chi: Option<&[f64]>, u: &[f64], mut g: F) -> Vec<f64>
    where
        F: FnMut(f64, Option<f64>, &Strain) -> f64,
    {
        let elements = self.mesh.elements();
        self.quad.integrate_against_shapes(&self.mesh, |e, qp| {
            let conn = &elements[e];
            let phi_q = qp.interpolate(crate::fem::element::gather(phi, conn));
            let chi_q = chi.map(|c| qp.interpolate(crate::fem::element::gather(c, conn)));
            let eps = strain_at(u, conn, qp);
            g(phi_q, chi_q, &eps)
        })
    }
}

/// One-shot state solve; see [`ElasticProblem`] for repeated solves.
pub fn solve_state(
    mesh: &StructuredQuadMesh,
    phi: &[f64],
    chi: Option<&[f64]>,
    mat: &IsotropicElasticity,
    spec: &InterpolationSpec,
    bc: &BoundaryConditions,
) -> Result<StateSolution> {
    ElasticProblem::new(mesh, mat, spec, bc)?.solve(phi, chi)
}
