//! Phase-field topology optimization of single- and graded-material structures
//! on structured quadrilateral meshes.

pub mod bench;
pub mod elasticity;
pub mod error;
pub mod fem;
pub mod io;
pub mod material;
pub mod opt;

pub use error::{Error, Result};
