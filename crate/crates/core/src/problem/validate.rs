//! Sampled checks of the standing assumptions on a problem.

use nalgebra::SymmetricEigen;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::domain::{Domain, Region};
use super::spec::{Horizon, ProblemSpec};
use crate::rng::{substream, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum CheckStatus {
    Pass,
    Warn,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub status: CheckStatus,
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn has_fail(&self) -> bool {
        self.checks.iter().any(|c| c.status == CheckStatus::Fail)
    }

    pub fn has_warn(&self) -> bool {
        self.checks.iter().any(|c| c.status == CheckStatus::Warn)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn sample_box(domain: &Domain, rng: &mut impl Rng) -> Vec<f64> {
    let bb = domain.bounding_box();
    bb.lower
        .iter()
        .zip(&bb.upper)
        .map(|(l, u)| l + (u - l) * rng.random::<f64>())
        .collect()
}

/// Runs structural, ellipticity and containment checks.
///
/// Uniform ellipticity failures are reported as `WARN`: degenerate noise is a
/// legitimate problem class. Everything else that is violated is a `FAIL`.
pub fn validate_spec(
    spec: &ProblemSpec,
    samples: usize,
    tolerance: f64,
    seed: u64,
) -> ValidationReport {
    let samples = samples.max(1);
    let mut checks = Vec::new();
    let mut rng = substream(seed, Purpose::Sampling, 0, 0);

    let structural = spec.domain.check().and_then(|_| match &spec.target {
        Some(t) => t.check(),
        None => Ok(()),
    });
    checks.push(Check {
        name: "domain_structure".into(),
        status: if structural.is_ok() {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        },
        detail: match structural {
            Ok(()) => "domain variants satisfy their invariants".into(),
            Err(e) => e.to_string(),
        },
        value: None,
        witness: None,
    });

    let t_end = spec.horizon.finite_end().unwrap_or(1.0);
    let mut min_eig = f64::INFINITY;
    let mut eig_witness = None;
    let mut drift_bad = None;
    for _ in 0..samples {
        let x = sample_box(&spec.domain, &mut rng);
        let t = t_end * rng.random::<f64>();
        let sigma = spec.dynamics.diffusion_tensor(t, &x).clone();
        let lam = SymmetricEigen::new(sigma).eigenvalues.min();
        if lam < min_eig {
            min_eig = lam;
            eig_witness = Some(x.clone());
        }
        if drift_bad.is_none() && spec.dynamics.drift(t, &x).iter().any(|v| !v.is_finite()) {
            drift_bad = Some(x);
        }
    }
    // clean tiny negative round-off so a rank-deficient tensor reports 0
    if min_eig.abs() < 1e-14 {
        min_eig = 0.0;
    }
    checks.push(Check {
        name: "uniform_ellipticity".into(),
        status: if min_eig >= tolerance {
            CheckStatus::Pass
        } else {
            CheckStatus::Warn
        },
        detail: format!("min eigenvalue of Sigma over {samples} samples is {min_eig}"),
        value: Some(min_eig),
        witness: eig_witness,
    });
    checks.push(Check {
        name: "drift_finite".into(),
        status: if drift_bad.is_none() {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        },
        detail: if drift_bad.is_none() {
            "drift finite at all samples".into()
        } else {
            "drift is non-finite at a sampled point".into()
        },
        value: None,
        witness: drift_bad,
    });

    let x0_ok = spec
        .domain
        .classify(&spec.x0, spec.domain.default_tolerance())
        .map(|r| r == Region::Interior)
        .unwrap_or(false);
    checks.push(Check {
        name: "initial_state_interior".into(),
        status: if x0_ok {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        },
        detail: "x0 lies strictly inside X".into(),
        value: None,
        witness: Some(spec.x0.clone()),
    });

    if let Some(target) = &spec.target {
        let finite = matches!(spec.horizon, Horizon::Finite { .. });
        let tol = spec.domain.default_tolerance();
        let mut escaped = None;
        let mut hits = 0usize;
        for _ in 0..samples {
            let x = sample_box(target, &mut rng);
            if target.classify_unchecked(&x, tol) != Region::Interior {
                continue;
            }
            hits += 1;
            if spec.domain.classify_unchecked(&x, tol) == Region::Exterior {
                escaped = Some(x);
                break;
            }
        }
        let ok = finite && escaped.is_none();
        checks.push(Check {
            name: "target_contained".into(),
            status: if ok {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            },
            detail: if !finite {
                "target set given with an infinite horizon".into()
            } else if escaped.is_some() {
                "a sampled target point lies outside X".into()
            } else {
                format!("{hits} sampled target points all inside X")
            },
            value: None,
            witness: escaped,
        });
    }

    ValidationReport { checks }
}
