use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("non-finite value in {what} at t = {t}")]
    NonFinite { what: &'static str, t: f64 },

    #[error("grid has no interior nodes")]
    EmptyInterior,

    #[error("singular factorization: zero pivot at row {row}")]
    SingularFactorization { row: usize },

    #[error("inverse iteration did not converge in {iterations} iterations (last change {last_change:e})")]
    NoConvergence { iterations: usize, last_change: f64 },

    #[error(
        "computed eigenvector is not positive (min entry {min_entry:e}); not the principal mode"
    )]
    NotPrincipal { min_entry: f64 },

    #[error("point is not in the interior of the domain")]
    NotInterior,

    #[error("coincident coordinates {i} and {j}")]
    Coincident { i: usize, j: usize },

    #[error("G G^T differs from Sigma by {deviation:e}")]
    InputNoiseMismatch { deviation: f64 },

    #[error("simulation produced a non-finite state at step {step}")]
    NonFiniteState { step: usize },

    #[error("malformed document: {0}")]
    Format(String),

    #[error("{0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
