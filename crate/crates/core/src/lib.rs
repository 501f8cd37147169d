//! Almost-sure controlled set invariance for Ito diffusions, certified through
//! the score `Sigma grad log h` of a survival probability.
//!
//! The pipeline is: describe the problem ([`problem`]), compute the survival
//! probability `h_T` or the principal Dirichlet eigenfunction ([`pde`],
//! [`eigen`]), test whether the score lies in the range of the input matrix
//! and build the controller ([`certify`]), then simulate the closed loop
//! ([`simulate`]). [`io`] reads and writes the CSV/JSON artifacts.

pub mod certify;
pub mod eigen;
pub mod error;
pub mod io;
pub mod pde;
pub mod problem;
pub mod rng;
pub mod simulate;

pub use error::{Error, Result};
