//! Finite-element building blocks: structured mesh, bilinear shapes, quadrature,
//! sparse symmetric storage and the linear solvers.

pub mod cholesky;
pub mod element;
pub mod mesh;
pub mod quadrature;
pub mod shape;
pub mod solve;
pub mod sparse;

pub use element::{ElementQuadrature, QuadPoint};
pub use mesh::{BoundaryEdge, BoundaryTag, StructuredQuadMesh};
pub use quadrature::QuadratureRule;
pub use shape::shape_functions;
pub use solve::{solve_saddle_scalar, solve_spd, CgOptions, ScalarSaddleSolver};
pub use sparse::SparseSymmetricSystem;
