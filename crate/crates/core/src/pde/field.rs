//! Space-time fields `h(t, x)` stored slice by slice on a grid.

use serde::{Deserialize, Serialize};

use super::grid::Grid;
use crate::error::{Error, Result};

/// Provenance of a field: which solver produced it and with what parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldMeta {
    pub solver: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_paths: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<usize>,
}

/// Values on every grid node for each time in an ascending time grid.
/// For a finite horizon the last time is `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    times: Vec<f64>,
    slices: Vec<Vec<f64>>,
    pub meta: FieldMeta,
}

impl SpaceTimeField {
    pub fn new(times: Vec<f64>, slices: Vec<Vec<f64>>, meta: FieldMeta) -> Result<Self> {
        if times.is_empty() || times.len() != slices.len() {
            return Err(Error::InvalidArgument(format!(
                "{} times for {} slices",
                times.len(),
                slices.len()
            )));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument(
                "time grid must be strictly ascending".into(),
            ));
        }
        let n = slices[0].len();
        if slices.iter().any(|s| s.len() != n) {
            return Err(Error::InvalidArgument(
                "slices have different lengths".into(),
            ));
        }
        Ok(SpaceTimeField {
            times,
            slices,
            meta,
        })
    }

    /// Evaluates `f(t, node)` at every node of every slice.
    pub fn tabulate(
        grid: &Grid,
        times: Vec<f64>,
        meta: FieldMeta,
        mut f: impl FnMut(f64, usize) -> f64,
    ) -> Result<Self> {
        let slices = times
            .iter()
            .map(|&t| (0..grid.node_count()).map(|p| f(t, p)).collect())
            .collect();
        SpaceTimeField::new(times, slices, meta)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn slice(&self, j: usize) -> &[f64] {
        &self.slices[j]
    }

    pub fn slices(&self) -> &[Vec<f64>] {
        &self.slices
    }

    pub fn node_count(&self) -> usize {
        self.slices[0].len()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("nonempty")
    }

    /// Checks the probability-field invariants: values in `[-delta, 1 + delta]`
    /// and zero on the Dirichlet layer before the terminal time.
    pub fn check_probability(&self, grid: &Grid, delta: f64) -> Result<()> {
        if self.node_count() != grid.node_count() {
            return Err(Error::DimensionMismatch {
                expected: grid.node_count(),
                actual: self.node_count(),
            });
        }
        let last = self.times.len() - 1;
        for (j, s) in self.slices.iter().enumerate() {
            for (p, &v) in s.iter().enumerate() {
                if !(v >= -delta && v <= 1.0 + delta) {
                    return Err(Error::InvalidArgument(format!(
                        "value {v} at node {p}, t = {} outside [0, 1]",
                        self.times[j]
                    )));
                }
                if j < last && grid.is_boundary(p) && v != 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "Dirichlet node {p} carries {v} at t = {}",
                        self.times[j]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// `n` equally spaced times on `[0, horizon]`.
pub fn uniform_times(horizon: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "need at least two time slices");
    (0..n)
        .map(|k| {
            if k + 1 == n {
                horizon
            } else {
                horizon * k as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// `n` times on `[0, horizon]` clustered towards the horizon:
/// `horizon - t_k = horizon (1 - k/(n-1))^2`.
pub fn graded_times(horizon: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "need at least two time slices");
    (0..n)
        .map(|k| {
            let s = 1.0 - k as f64 / (n - 1) as f64;
            if k + 1 == n {
                horizon
            } else {
                horizon - horizon * s * s
            }
        })
        .collect()
}
