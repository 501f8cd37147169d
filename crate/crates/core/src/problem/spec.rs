use serde::{Deserialize, Serialize};

use super::domain::{Domain, Region};
use super::dynamics::DynamicsField;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Horizon {
    Finite { t: f64 },
    Infinite,
}

impl Horizon {
    pub fn finite_end(&self) -> Option<f64> {
        match self {
            Horizon::Finite { t } => Some(*t),
            Horizon::Infinite => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecDoc {
    dynamics: DynamicsField,
    domain: Domain,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    target: Option<Domain>,
    horizon: Horizon,
    x0: Vec<f64>,
}

/// Problem data `(f, G, sigma, X, X_T, I)` plus an initial state.
///
/// Construction checks dimensions, domain invariants, `x0` in the interior of
/// `X`, and that a target set only appears with a finite horizon. Target
/// containment `X_T ⊆ X` is a sampled property and lives in
/// [`validate_spec`](super::validate::validate_spec).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecDoc", into = "SpecDoc")]
pub struct ProblemSpec {
    pub dynamics: DynamicsField,
    pub domain: Domain,
    pub target: Option<Domain>,
    pub horizon: Horizon,
    pub x0: Vec<f64>,
}

impl TryFrom<SpecDoc> for ProblemSpec {
    type Error = Error;

    fn try_from(d: SpecDoc) -> Result<Self> {
        ProblemSpec::new(d.dynamics, d.domain, d.target, d.horizon, d.x0)
    }
}

impl From<ProblemSpec> for SpecDoc {
    fn from(p: ProblemSpec) -> Self {
        SpecDoc {
            dynamics: p.dynamics,
            domain: p.domain,
            target: p.target,
            horizon: p.horizon,
            x0: p.x0,
        }
    }
}

impl ProblemSpec {
    pub fn new(
        dynamics: DynamicsField,
        domain: Domain,
        target: Option<Domain>,
        horizon: Horizon,
        x0: Vec<f64>,
    ) -> Result<Self> {
        domain.check()?;
        let n = domain.dim();
        if dynamics.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: dynamics.dim(),
            });
        }
        if x0.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: x0.len(),
            });
        }
        if let Horizon::Finite { t } = horizon {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "finite horizon must be positive, got {t}"
                )));
            }
        }
        if let Some(target) = &target {
            target.check()?;
            if target.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: target.dim(),
                });
            }
            if horizon == Horizon::Infinite {
                return Err(Error::InvalidArgument(
                    "a target set requires a finite horizon".into(),
                ));
            }
        }
        if domain.classify(&x0, domain.default_tolerance())? != Region::Interior {
            return Err(Error::NotInterior);
        }
        Ok(ProblemSpec {
            dynamics,
            domain,
            target,
            horizon,
            x0,
        })
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Terminal indicator `1{x in X_T}` (or `1{x in X}` without a target).
    pub fn terminal_indicator(&self, x: &[f64]) -> f64 {
        let set = self.target.as_ref().unwrap_or(&self.domain);
        let tol = self.domain.default_tolerance();
        if set.classify_unchecked(x, tol) == Region::Interior {
            1.0
        } else {
            0.0
        }
    }
}
