//! Run configuration: one JSON document per example.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use setinv::certify::{DEFAULT_EPS, DEFAULT_S_MAX, DEFAULT_TOLERANCE};
use setinv::problem::{Horizon, ProblemSpec};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    Series,
    FeynmanKac,
    EigenAnalytic,
    EigenNumeric,
}

impl Solver {
    pub fn is_finite(self) -> bool {
        matches!(self, Solver::Series | Solver::FeynmanKac)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Uniform,
    #[default]
    Graded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub slices: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig {
            slices: 101,
            spacing: Spacing::Graded,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarlo {
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesConfig {
    /// Precomputed annulus modes; by default enough for the smallest time-to-go.
    #[serde(default)]
    pub annulus_modes: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenConfig {
    pub tolerance: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for EigenConfig {
    fn default() -> Self {
        EigenConfig {
            tolerance: 1e-10,
            max_iter: 10_000,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyConfig {
    pub tolerance: f64,
    pub eps: f64,
    pub s_max: f64,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        CertifyConfig {
            tolerance: DEFAULT_TOLERANCE,
            eps: DEFAULT_EPS,
            s_max: DEFAULT_S_MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
    /// Required for an infinite horizon; a finite one runs to `T`.
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default)]
    pub stride: Option<usize>,
    /// Also simulate the uncontrolled prior on the same noise.
    #[serde(default)]
    pub baseline: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub name: String,
    pub problem: ProblemSpec,
    pub solver: Solver,
    /// Cells per axis of the grid over the domain's bounding box.
    pub cells: Vec<usize>,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub series: SeriesConfig,
    #[serde(default)]
    pub feynman_kac: Option<MonteCarlo>,
    #[serde(default)]
    pub eigen: EigenConfig,
    #[serde(default)]
    pub certify: CertifyConfig,
    pub simulation: SimulationConfig,
    /// Output directory, relative to the working directory.
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<(), CliError> {
        let finite = matches!(self.problem.horizon, Horizon::Finite { .. });
        if self.solver.is_finite() != finite {
            return Err(CliError::Usage(format!(
                "solver {:?} does not match a {} horizon",
                self.solver,
                if finite { "finite" } else { "infinite" }
            )));
        }
        if self.cells.len() != self.problem.dim() {
            return Err(CliError::Usage(format!(
                "cells has {} entries for a {}-dimensional problem",
                self.cells.len(),
                self.problem.dim()
            )));
        }
        if self.solver == Solver::FeynmanKac && self.feynman_kac.is_none() {
            return Err(CliError::Usage(
                "the feynman-kac solver needs a `feynman_kac` block".into(),
            ));
        }
        if !finite && self.simulation.t_end.is_none() {
            return Err(CliError::Usage(
                "an infinite horizon needs simulation.t_end".into(),
            ));
        }
        if finite && self.time.slices < 3 {
            return Err(CliError::Usage("need at least three time slices".into()));
        }
        Ok(())
    }
}
