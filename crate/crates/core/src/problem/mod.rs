//! Problem data: sets, dynamics, horizons and their validation.

mod domain;
mod dynamics;
mod spec;
mod validate;

pub use domain::{domain_contains, BoundingBox, Domain, Region};
pub use dynamics::{sigma_to_sigma_tensor, Drift, DynamicsField, MatrixSpec};
pub use spec::{Horizon, ProblemSpec};
pub use validate::{validate_spec, Check, CheckStatus, ValidationReport};
