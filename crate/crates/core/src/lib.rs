//! Bootstrap algebraic multigrid with coarse grids and interpolation chosen
//! by least angle regression on smooth test vectors.

pub mod coarsening;
pub mod config;
pub mod dense;
pub mod error;
pub mod fem;
pub mod harness;
pub mod lars;
pub mod mm;
pub mod multilevel;
pub mod smoother;
pub mod sparse;

pub use error::{Error, Result};
pub use sparse::CsrMatrix;
