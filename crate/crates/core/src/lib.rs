//! Perturbation analysis for Moore-Penrose inverses on finite-dimensional
//! matrix surrogates.
//!
//! The crate provides the graph-metric machinery for treating a matrix as a
//! closed operator (`graph`), conversion of generalized inverses to the
//! Moore-Penrose inverse (`geninv`), stable-perturbation predicates with the
//! closed-form perturbed pseudoinverse and its bound ledger (`perturb`), and
//! the induced least-squares perturbation theory (`lstsq`). The SVD-based
//! pseudoinverse in `linalg` acts as the independent oracle every closed form
//! is verified against.

pub mod error;
pub mod geninv;
pub mod graph;
pub mod linalg;
pub mod lstsq;
pub mod mat;
pub mod perturb;

pub use error::{Error, Result};
pub use mat::Mat;
