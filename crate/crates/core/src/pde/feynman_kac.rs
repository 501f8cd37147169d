//! Monte Carlo estimates of `h_T` from uncontrolled Euler-Maruyama paths.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::field::{uniform_times, FieldMeta, SpaceTimeField};
use super::grid::Grid;
use crate::error::{Error, Result};
use crate::problem::{ProblemSpec, Region};
use crate::rng::{substream, Purpose};

/// Node label used for single-point estimates.
const POINT_NODE: u32 = u32::MAX;

/// Runs `n_paths` paths of `checkpoints.last()` steps from `x` and, for each
/// checkpoint step count, returns how many paths are still inside `X` (and
/// inside `X_T`, when the spec has one) at that step.
fn survival_counts(
    spec: &ProblemSpec,
    x: &[f64],
    checkpoints: &[usize],
    n_paths: usize,
    dt: f64,
    seed: u64,
    node: u32,
) -> Result<Vec<usize>> {
    let n = spec.dim();
    let p = spec.dynamics.noise_dim();
    let tol = spec.domain.default_tolerance();
    let total = checkpoints.iter().copied().max().unwrap_or(0);
    let sqrt_dt = dt.sqrt();
    let paths = (0..n_paths)
        .into_par_iter()
        .map(|path| -> Result<Vec<bool>> {
            let mut rng = substream(seed, Purpose::FeynmanKac, node, path as u32);
            let mut state = x.to_vec();
            let mut f = vec![0.0; n];
            let mut xi = vec![0.0; p];
            let mut hits = vec![false; checkpoints.len()];
            let mut step = 0;
            loop {
                for (k, &c) in checkpoints.iter().enumerate() {
                    if c == step {
                        hits[k] = spec.terminal_indicator(&state) == 1.0;
                    }
                }
                if step == total {
                    break;
                }
                spec.dynamics.drift_into(0.0, &state, &mut f);
                for v in xi.iter_mut() {
                    *v = StandardNormal.sample(&mut rng);
                }
                for (s, fi) in state.iter_mut().zip(&f) {
                    *s += fi * dt;
                }
                spec.dynamics.add_noise(&xi, sqrt_dt, &mut state);
                step += 1;
                if state.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteState { step });
                }
                if spec.domain.classify_unchecked(&state, tol) != Region::Interior {
                    break;
                }
            }
            Ok(hits)
        });
    let per_path: Vec<Vec<bool>> = paths.collect::<Result<_>>()?;
    let mut counts = vec![0; checkpoints.len()];
    for hits in per_path {
        for (c, h) in counts.iter_mut().zip(hits) {
            *c += h as usize;
        }
    }
    Ok(counts)
}

fn finite_horizon(spec: &ProblemSpec) -> Result<f64> {
    spec.horizon
        .finite_end()
        .ok_or_else(|| Error::InvalidArgument("Feynman-Kac estimates need a finite horizon".into()))
}

/// Fraction of uncontrolled paths from `(t, x)` that stay in `X` until `T`
/// and end in `X_T`, with its binomial standard error.
///
/// The step is shrunk to `(T - t) / ceil((T - t) / dt)` so the last step
/// lands on `T`. Points on or outside the boundary return `(0, 0)`.
pub fn feynman_kac_point(
    spec: &ProblemSpec,
    t: f64,
    x: &[f64],
    n_paths: usize,
    dt: f64,
    seed: u64,
) -> Result<(f64, f64)> {
    let horizon = finite_horizon(spec)?;
    if x.len() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            actual: x.len(),
        });
    }
    if !(t < horizon) {
        return Err(Error::InvalidArgument(format!(
            "t = {t} is not before the horizon {horizon}"
        )));
    }
    if n_paths == 0 || !(dt > 0.0) {
        return Err(Error::InvalidArgument("need n_paths > 0 and dt > 0".into()));
    }
    match spec.domain.classify(x, spec.domain.default_tolerance())? {
        Region::Interior => {}
        Region::Boundary => return Ok((0.0, 0.0)),
        Region::Exterior => return Err(Error::NotInterior),
    }
    let tau = horizon - t;
    let steps = (tau / dt - 1e-9).ceil().max(1.0) as usize;
    let counts = survival_counts(
        spec,
        x,
        &[steps],
        n_paths,
        tau / steps as f64,
        seed,
        POINT_NODE,
    )?;
    let p = counts[0] as f64 / n_paths as f64;
    Ok((p, (p * (1.0 - p) / n_paths as f64).sqrt()))
}

/// [`feynman_kac_field_at`] on `n_time_slices` uniform times over `[0, T]`.
pub fn feynman_kac_field(
    spec: &ProblemSpec,
    grid: &Grid,
    n_time_slices: usize,
    n_paths: usize,
    dt: f64,
    seed: u64,
) -> Result<SpaceTimeField> {
    let horizon = finite_horizon(spec)?;
    if n_time_slices < 2 {
        return Err(Error::InvalidArgument(
            "need at least two time slices".into(),
        ));
    }
    feynman_kac_field_at(
        spec,
        grid,
        uniform_times(horizon, n_time_slices),
        n_paths,
        dt,
        seed,
    )
}

/// Monte Carlo field on the given times (the last must be `T`).
///
/// The dynamics are time-homogeneous, so one ensemble per node started at
/// the earliest time serves every slice: the estimate for time `t_j` is read
/// off after `(T - t_j) / dt` steps. Every time-to-go must therefore be an
/// integer number of steps.
pub fn feynman_kac_field_at(
    spec: &ProblemSpec,
    grid: &Grid,
    times: Vec<f64>,
    n_paths: usize,
    dt: f64,
    seed: u64,
) -> Result<SpaceTimeField> {
    let horizon = finite_horizon(spec)?;
    if grid.dim() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            actual: grid.dim(),
        });
    }
    if n_paths == 0 || !(dt > 0.0) {
        return Err(Error::InvalidArgument("need n_paths > 0 and dt > 0".into()));
    }
    if times
        .last()
        .map_or(true, |&t| (t - horizon).abs() > 1e-12 * horizon.max(1.0))
    {
        return Err(Error::InvalidArgument(
            "last time slice must equal the horizon".into(),
        ));
    }
    let mut checkpoints = Vec::with_capacity(times.len());
    for &t in &times {
        let steps = (horizon - t) / dt;
        let rounded = steps.round();
        if (steps - rounded).abs() > 1e-6 * steps.max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "time-to-go {} is not a multiple of dt = {dt}",
                horizon - t
            )));
        }
        checkpoints.push(rounded as usize);
    }

    let nodes = grid.node_count();
    let columns: Vec<Vec<f64>> = (0..nodes)
        .map(|p| -> Result<Vec<f64>> {
            let x = grid.coords(p);
            if !grid.is_interior(p) {
                return Ok(checkpoints
                    .iter()
                    .map(|&c| {
                        if c == 0 {
                            spec.terminal_indicator(&x)
                        } else {
                            0.0
                        }
                    })
                    .collect());
            }
            let counts = survival_counts(spec, &x, &checkpoints, n_paths, dt, seed, p as u32)?;
            Ok(counts
                .into_iter()
                .map(|c| c as f64 / n_paths as f64)
                .collect())
        })
        .collect::<Result<_>>()?;

    let slices = (0..times.len())
        .map(|j| columns.iter().map(|col| col[j]).collect())
        .collect();
    let meta = FieldMeta {
        solver: "feynman_kac".into(),
        n_paths: Some(n_paths),
        dt: Some(dt),
        seed: Some(seed),
        truncation: None,
    };
    SpaceTimeField::new(times, slices, meta)
}
