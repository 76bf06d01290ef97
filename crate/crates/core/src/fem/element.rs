use super::mesh::StructuredQuadMesh;
use super::quadrature::QuadratureRule;
use super::shape::shape_functions;
use crate::error::{Error, Result};

/// Shape data of one element at one quadrature point, in physical coordinates.
#[derive(Debug, Clone, Copy)]
pub struct QuadPoint {
    pub n: [f64; 4],
    pub grad: [[f64; 2]; 4],
    /// Quadrature weight times Jacobian determinant.
    pub weight: f64,
}

impl QuadPoint {
    #[inline]
    pub fn interpolate(&self, nodal: [f64; 4]) -> f64 {
        self.n[0] * nodal[0] + self.n[1] * nodal[1] + self.n[2] * nodal[2] + self.n[3] * nodal[3]
    }
}

/// Precomputed quadrature-point data for every element of a mesh.
#[derive(Debug, Clone)]
pub struct ElementQuadrature {
    points_per_element: usize,
    data: Vec<QuadPoint>,
}

impl ElementQuadrature {
    pub fn new(mesh: &StructuredQuadMesh, rule: &QuadratureRule) -> Result<Self> {
        let mut data = Vec::with_capacity(mesh.element_count() * rule.len());
        for e in 0..mesh.element_count() {
            let x = mesh.element_nodes(e);
            for (p, &w) in rule.points.iter().zip(&rule.weights) {
                let (n, dref) = shape_functions(p[0], p[1]);
                // J[r][c] = d x_c / d xi_r
                let mut jac = [[0.0; 2]; 2];
                for a in 0..4 {
                    for r in 0..2 {
                        for c in 0..2 {
                            jac[r][c] += dref[a][r] * x[a][c];
                        }
                    }
                }
                let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
                if det <= 0.0 {
                    return Err(Error::invalid(format!(
                        "element {e} has non-positive Jacobian determinant {det:e}"
                    )));
                }
                let inv = [
                    [jac[1][1] / det, -jac[0][1] / det],
                    [-jac[1][0] / det, jac[0][0] / det],
                ];
                let grad = dref.map(|d| {
                    [
                        inv[0][0] * d[0] + inv[0][1] * d[1],
                        inv[1][0] * d[0] + inv[1][1] * d[1],
                    ]
                });
                data.push(QuadPoint {
                    n,
                    grad,
                    weight: w * det,
                });
            }
        }
        Ok(Self {
            points_per_element: rule.len(),
            data,
        })
    }

    /// Default 2x2 Gauss data for `mesh`.
    pub fn gauss_2x2(mesh: &StructuredQuadMesh) -> Result<Self> {
        Self::new(mesh, &QuadratureRule::gauss_2x2())
    }

    pub fn points(&self, element: usize) -> &[QuadPoint] {
        let k = self.points_per_element;
        &self.data[element * k..(element + 1) * k]
    }

    pub fn element_count(&self) -> usize {
        self.data.len() / self.points_per_element
    }

    /// Load vector `b_i = \int N_i f dx` for a quadrature-point integrand `f(element, point_index, point)`.
    pub fn integrate_against_shapes<F>(&self, mesh: &StructuredQuadMesh, mut f: F) -> Vec<f64>
    where
        F: FnMut(usize, &QuadPoint) -> f64,
    {
        let mut out = vec![0.0; mesh.node_count()];
        for (e, conn) in mesh.elements().iter().enumerate() {
            let mut local = [0.0; 4];
            for qp in self.points(e) {
                let v = f(e, qp) * qp.weight;
                for a in 0..4 {
                    local[a] += qp.n[a] * v;
                }
            }
            for a in 0..4 {
                out[conn[a]] += local[a];
            }
        }
        out
    }

    /// Domain integral of a quadrature-point integrand.
    pub fn integrate<F>(&self, mesh: &StructuredQuadMesh, mut f: F) -> f64
    where
        F: FnMut(usize, &QuadPoint) -> f64,
    {
        let mut total = 0.0;
        for e in 0..mesh.element_count() {
            for qp in self.points(e) {
                total += f(e, qp) * qp.weight;
            }
        }
        total
    }
}

/// Nodal values of a scalar field gathered for one element.
#[inline]
pub fn gather(field: &[f64], conn: &[usize; 4]) -> [f64; 4] {
    [field[conn[0]], field[conn[1]], field[conn[2]], field[conn[3]]]
}
