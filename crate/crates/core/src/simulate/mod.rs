//! Closed-loop Euler-Maruyama simulation and exit statistics.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certify::{dyson_drift, score_finite, ScoreField};
use crate::eigen::AnalyticEigenpair;
use crate::error::{Error, Result};
use crate::pde::{Grid, SpaceTimeField};
use crate::problem::{Domain, DynamicsField, ProblemSpec, Region};
use crate::rng::{substream, Purpose};

/// Single path `x_{k+1} = x_k + b(t_k, x_k) dt + D(t_k, x_k) sqrt(dt) xi_k`.
/// Returns the `n_steps + 1` states.
pub fn euler_maruyama(
    drift: impl Fn(f64, &[f64], &mut [f64]),
    diffusion: impl Fn(f64, &[f64]) -> DMatrix<f64>,
    x0: &[f64],
    dt: f64,
    n_steps: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument("dt must be positive".into()));
    }
    let n = x0.len();
    let mut rng = substream(seed, Purpose::Sampling, 0, 0);
    let mut x = x0.to_vec();
    let mut b = vec![0.0; n];
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push(x.clone());
    for k in 0..n_steps {
        let t = k as f64 * dt;
        drift(t, &x, &mut b);
        let d = diffusion(t, &x);
        let xi: Vec<f64> = (0..d.ncols())
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        for i in 0..n {
            let noise: f64 = (0..d.ncols()).map(|j| d[(i, j)] * xi[j]).sum();
            x[i] += b[i] * dt + noise * dt.sqrt();
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { step: k + 1 });
        }
        out.push(x.clone());
    }
    Ok(out)
}

/// One simulated path. States are stored every `stride` steps, plus the exit
/// step or the final step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub steps: Vec<usize>,
    pub states: Vec<Vec<f64>>,
    pub exit_step: Option<usize>,
    /// Smallest signed distance to the boundary over every simulated step.
    pub min_distance: f64,
}

impl PathRecord {
    pub fn final_state(&self) -> &[f64] {
        self.states
            .last()
            .expect("a path stores at least its start")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEnsemble {
    pub n_paths: usize,
    pub dt: f64,
    pub t0: f64,
    pub t_end: f64,
    pub n_steps: usize,
    pub seed: u64,
    pub stride: usize,
    pub paths: Vec<PathRecord>,
}

/// Default storage stride: every step for small ensembles, every 10th above 100 paths.
pub fn default_stride(n_paths: usize) -> usize {
    if n_paths <= 100 {
        1
    } else {
        10
    }
}

/// Options shared by the closed-loop runners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
    /// `None` picks [`default_stride`].
    pub stride: Option<usize>,
}

impl SimOptions {
    pub fn new(n_paths: usize, dt: f64, seed: u64) -> Self {
        SimOptions {
            n_paths,
            dt,
            seed,
            stride: None,
        }
    }

    fn check(&self) -> Result<usize> {
        if self.n_paths == 0 || !(self.dt > 0.0) {
            return Err(Error::InvalidArgument("need n_paths > 0 and dt > 0".into()));
        }
        let stride = self.stride.unwrap_or_else(|| default_stride(self.n_paths));
        if stride == 0 {
            return Err(Error::InvalidArgument("stride must be positive".into()));
        }
        Ok(stride)
    }
}

/// Runs every path from `x0` over `[t0, t_end]`, stopping a path at the first
/// step whose state is not interior to `domain`.
fn run_ensemble(
    domain: &Domain,
    x0: &[f64],
    t0: f64,
    t_end: f64,
    opts: &SimOptions,
    noise_dim: usize,
    drift: &(dyn Fn(f64, &[f64], &mut [f64]) + Sync),
    noise: &(dyn Fn(&[f64], f64, &mut [f64]) + Sync),
) -> Result<PathEnsemble> {
    let stride = opts.check()?;
    if !(t_end > t0) {
        return Err(Error::InvalidArgument(
            "simulation end must follow its start".into(),
        ));
    }
    let n = x0.len();
    let tol = domain.default_tolerance();
    if domain.classify(x0, tol)? != Region::Interior {
        return Err(Error::NotInterior);
    }
    let n_steps = ((t_end - t0) / opts.dt - 1e-9).ceil().max(1.0) as usize;
    let dt = (t_end - t0) / n_steps as f64;
    let sqrt_dt = dt.sqrt();
    let paths = (0..opts.n_paths)
        .into_par_iter()
        .map(|path| -> Result<PathRecord> {
            let mut rng = substream(opts.seed, Purpose::ClosedLoop, 0, path as u32);
            let mut x = x0.to_vec();
            let mut b = vec![0.0; n];
            let mut xi = vec![0.0; noise_dim];
            let mut rec = PathRecord {
                steps: vec![0],
                states: vec![x.clone()],
                exit_step: None,
                min_distance: domain.signed_distance(&x),
            };
            for k in 1..=n_steps {
                let t = t0 + (k - 1) as f64 * dt;
                drift(t, &x, &mut b);
                for v in xi.iter_mut() {
                    *v = StandardNormal.sample(&mut rng);
                }
                for (xi_, bi) in x.iter_mut().zip(&b) {
                    *xi_ += bi * dt;
                }
                noise(&xi, sqrt_dt, &mut x);
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteState { step: k });
                }
                rec.min_distance = rec.min_distance.min(domain.signed_distance(&x));
                let exited = domain.classify_unchecked(&x, tol) != Region::Interior;
                if exited || k % stride == 0 || k == n_steps {
                    rec.steps.push(k);
                    rec.states.push(x.clone());
                }
                if exited {
                    rec.exit_step = Some(k);
                    break;
                }
            }
            Ok(rec)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PathEnsemble {
        n_paths: opts.n_paths,
        dt,
        t0,
        t_end,
        n_steps,
        seed: opts.seed,
        stride,
        paths,
    })
}

fn noise_of(dynamics: &DynamicsField) -> impl Fn(&[f64], f64, &mut [f64]) + Sync + '_ {
    move |xi, scale, out| dynamics.add_noise(xi, scale, out)
}

/// Closed loop `dx = (f + s(t, x)) dt + sigma dw` with a precomputed score
/// field, from `spec.x0` over `[t0, t_end]`.
pub fn simulate_with_score(
    spec: &ProblemSpec,
    score: &ScoreField,
    t0: f64,
    t_end: f64,
    opts: &SimOptions,
) -> Result<PathEnsemble> {
    let d = &spec.dynamics;
    let n = spec.dim();
    if score.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: score.dim(),
        });
    }
    let drift = |t: f64, x: &[f64], out: &mut [f64]| {
        d.drift_into(t, x, out);
        let mut s = [0.0; 8];
        score.eval_into(t, x, &mut s[..n]);
        for (o, v) in out.iter_mut().zip(&s[..n]) {
            *o += v;
        }
    };
    run_ensemble(
        &spec.domain,
        &spec.x0,
        t0,
        t_end,
        opts,
        d.noise_dim(),
        &drift,
        &noise_of(d),
    )
}

/// Conditioned finite-horizon process: the score of `field` is built on
/// `grid`, then interpolated along each path up to `T`.
pub fn simulate_conditioned_finite(
    spec: &ProblemSpec,
    field: &SpaceTimeField,
    grid: &Grid,
    eps: f64,
    s_max: f64,
    opts: &SimOptions,
) -> Result<PathEnsemble> {
    let horizon = spec.horizon.finite_end().ok_or_else(|| {
        Error::InvalidArgument("conditioned finite simulation needs a finite horizon".into())
    })?;
    let score = score_finite(field, grid, &spec.dynamics, eps, s_max)?;
    simulate_with_score(spec, &score, 0.0, horizon, opts)
}

/// Source of `psi_0` for the infinite-horizon closed loop.
#[derive(Debug, Clone, Copy)]
pub enum PsiSource<'a> {
    /// Score precomputed from a numeric eigenpair.
    Numeric(&'a ScoreField),
    /// Closed form, differentiated exactly along the path.
    Analytic(&'a AnalyticEigenpair),
}

/// Conditioned infinite-horizon process on `[0, t_end]`.
pub fn simulate_conditioned_infinite(
    spec: &ProblemSpec,
    psi: PsiSource<'_>,
    s_max: f64,
    t_end: f64,
    opts: &SimOptions,
) -> Result<PathEnsemble> {
    match psi {
        PsiSource::Numeric(score) => simulate_with_score(spec, score, 0.0, t_end, opts),
        PsiSource::Analytic(pair) => {
            let d = &spec.dynamics;
            let n = spec.dim();
            let drift = |t: f64, x: &[f64], out: &mut [f64]| {
                d.drift_into(t, x, out);
                let g = pair.grad_log_psi(x);
                let sigma = d.diffusion_tensor(t, x);
                let mut s = [0.0; 8];
                for i in 0..n {
                    s[i] = (0..n).map(|k| sigma[(i, k)] * g[k]).sum();
                }
                let norm = s[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
                let scale = if norm > s_max { s_max / norm } else { 1.0 };
                for (o, v) in out.iter_mut().zip(&s[..n]) {
                    *o += scale * v;
                }
            };
            run_ensemble(
                &spec.domain,
                &spec.x0,
                0.0,
                t_end,
                opts,
                d.noise_dim(),
                &drift,
                &noise_of(d),
            )
        }
    }
}

/// The prior `dx = f dt + sigma dw`, same noise streams as the closed loop.
pub fn simulate_uncontrolled(
    spec: &ProblemSpec,
    t_end: f64,
    opts: &SimOptions,
) -> Result<PathEnsemble> {
    let d = &spec.dynamics;
    let drift = |t: f64, x: &[f64], out: &mut [f64]| d.drift_into(t, x, out);
    run_ensemble(
        &spec.domain,
        &spec.x0,
        0.0,
        t_end,
        opts,
        d.noise_dim(),
        &drift,
        &noise_of(d),
    )
}

/// Dyson Brownian motion: drift `sum_{j != i} 1 / (x_i - x_j)`, unit noise per
/// coordinate. Leaving the Weyl chamber counts as an exit.
pub fn simulate_dyson(x0: &[f64], t_end: f64, opts: &SimOptions) -> Result<PathEnsemble> {
    let n = x0.len();
    let chamber = Domain::weyl(n)?;
    let drift = |_: f64, x: &[f64], out: &mut [f64]| match dyson_drift(x) {
        Ok(u) => out.copy_from_slice(&u),
        Err(_) => out.iter_mut().for_each(|v| *v = f64::NAN),
    };
    let noise = |xi: &[f64], scale: f64, out: &mut [f64]| {
        for (o, z) in out.iter_mut().zip(xi) {
            *o += scale * z;
        }
    };
    run_ensemble(&chamber, x0, 0.0, t_end, opts, n, &drift, &noise)
}

/// Per-path summary row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSummary {
    pub path: usize,
    pub exit_step: Option<usize>,
    pub exit_time: Option<f64>,
    pub final_state: Vec<f64>,
    pub in_target: Option<bool>,
    pub min_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStats {
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
    pub exit_fraction: f64,
    pub survived_fraction: f64,
    /// `sqrt(p (1 - p) / n)` for the exit fraction.
    pub exit_standard_error: f64,
    /// Fraction of all paths that survive and end inside the target.
    pub terminal_hit_fraction: Option<f64>,
    /// Smallest signed boundary distance over the surviving paths.
    pub min_boundary_distance: f64,
    pub paths: Vec<PathSummary>,
}

/// Exit and terminal-hit fractions of an ensemble.
pub fn exit_statistics(
    ensemble: &PathEnsemble,
    domain: &Domain,
    target: Option<&Domain>,
) -> Result<SimStats> {
    if ensemble.paths.is_empty() {
        return Err(Error::InvalidArgument("empty ensemble".into()));
    }
    let n = ensemble.paths.len();
    let ttol = target.map(|t| t.default_tolerance());
    let dtol = domain.default_tolerance();
    let rows: Vec<PathSummary> = ensemble
        .paths
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let final_state = p.final_state().to_vec();
            // Ensembles built elsewhere may end outside without an exit record.
            let exit_step = p.exit_step.or_else(|| {
                (domain.classify_unchecked(&final_state, dtol) != Region::Interior)
                    .then(|| *p.steps.last().expect("start"))
            });
            let in_target = match (target, ttol) {
                (Some(t), Some(tol)) => Some(
                    exit_step.is_none()
                        && t.classify_unchecked(&final_state, tol) == Region::Interior,
                ),
                _ => None,
            };
            PathSummary {
                path: i,
                exit_step,
                exit_time: exit_step.map(|k| ensemble.t0 + k as f64 * ensemble.dt),
                final_state,
                in_target,
                min_distance: p.min_distance,
            }
        })
        .collect();
    let exits = rows.iter().filter(|r| r.exit_step.is_some()).count();
    let p = exits as f64 / n as f64;
    let hits =
        target.map(|_| rows.iter().filter(|r| r.in_target == Some(true)).count() as f64 / n as f64);
    let min_boundary_distance = rows
        .iter()
        .filter(|r| r.exit_step.is_none())
        .map(|r| r.min_distance)
        .fold(f64::INFINITY, f64::min);
    Ok(SimStats {
        n_paths: n,
        dt: ensemble.dt,
        seed: ensemble.seed,
        exit_fraction: p,
        survived_fraction: 1.0 - p,
        exit_standard_error: (p * (1.0 - p) / n as f64).sqrt(),
        terminal_hit_fraction: hits,
        min_boundary_distance,
        paths: rows,
    })
}

/// One row of [`dt_refinement_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtRow {
    pub dt: f64,
    pub exit_fraction: f64,
    pub standard_error: f64,
}

/// Exit fraction for each step size, running `simulate(dt)` for each.
pub fn dt_refinement_check(
    dts: &[f64],
    domain: &Domain,
    simulate: impl Fn(f64) -> Result<PathEnsemble>,
) -> Result<Vec<DtRow>> {
    if dts.is_empty() {
        return Err(Error::InvalidArgument("need at least one step size".into()));
    }
    dts.iter()
        .map(|&dt| {
            let stats = exit_statistics(&simulate(dt)?, domain, None)?;
            Ok(DtRow {
                dt,
                exit_fraction: stats.exit_fraction,
                standard_error: stats.exit_standard_error,
            })
        })
        .collect()
}

/// Exit fractions are non-increasing as `dt` shrinks, up to `k` standard errors.
pub fn exit_fraction_non_increasing(rows: &[DtRow], k: f64) -> bool {
    let mut sorted = rows.to_vec();
    sorted.sort_by(|a, b| b.dt.total_cmp(&a.dt));
    sorted.windows(2).all(|w| {
        let se = w[0].standard_error.hypot(w[1].standard_error);
        w[1].exit_fraction <= w[0].exit_fraction + k * se
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::Horizon;

    fn box_spec(t: f64) -> ProblemSpec {
        ProblemSpec::new(
            DynamicsField::brownian(1),
            Domain::rect(vec![0.0], vec![1.0]).unwrap(),
            None,
            Horizon::Finite { t },
            vec![0.5],
        )
        .unwrap()
    }

    #[test]
    fn still_path() {
        let p = euler_maruyama(
            |_, _, o| o.fill(0.0),
            |_, _| DMatrix::zeros(2, 2),
            &[1.0, 2.0],
            0.1,
            5,
            1,
        )
        .unwrap();
        assert!(p.iter().all(|x| x == &vec![1.0, 2.0]));
        assert_eq!(p.len(), 6);
    }

    #[test]
    fn brownian_variance() {
        let t = 0.5;
        let xs: Vec<f64> = (0..10_000u64)
            .map(|s| {
                *euler_maruyama(
                    |_, _, o| o.fill(0.0),
                    |_, _| DMatrix::identity(1, 1),
                    &[0.0],
                    0.05,
                    10,
                    s,
                )
                .unwrap()[10]
                    .first()
                    .unwrap()
            })
            .collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((var / t - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn deterministic_and_contained() {
        let spec = box_spec(1.0);
        let opts = SimOptions::new(50, 1e-2, 9);
        let a = simulate_uncontrolled(&spec, 1.0, &opts).unwrap();
        let b = simulate_uncontrolled(&spec, 1.0, &opts).unwrap();
        assert_eq!(a, b);
        for p in &a.paths {
            let last = p.states.len() - 1;
            for (k, x) in p.states.iter().enumerate() {
                let r = spec
                    .domain
                    .classify(x, spec.domain.default_tolerance())
                    .unwrap();
                if p.exit_step.is_some() && k == last {
                    assert_ne!(r, Region::Interior);
                } else {
                    assert_eq!(r, Region::Interior);
                }
            }
        }
        let stats = exit_statistics(&a, &spec.domain, None).unwrap();
        assert!((stats.exit_fraction + stats.survived_fraction - 1.0).abs() < 1e-15);
        assert!(stats.exit_fraction > 0.5);
    }

    #[test]
    fn statistics_of_simple_ensembles() {
        let domain = Domain::rect(vec![0.0], vec![1.0]).unwrap();
        let still = PathEnsemble {
            n_paths: 1,
            dt: 0.1,
            t0: 0.0,
            t_end: 1.0,
            n_steps: 10,
            seed: 0,
            stride: 1,
            paths: vec![PathRecord {
                steps: vec![0, 10],
                states: vec![vec![0.5], vec![0.5]],
                exit_step: None,
                min_distance: 0.5,
            }],
        };
        let s = exit_statistics(&still, &domain, None).unwrap();
        assert_eq!(s.exit_fraction, 0.0);
        let mut gone = still.clone();
        gone.paths[0].exit_step = Some(4);
        let s = exit_statistics(&gone, &domain, None).unwrap();
        assert_eq!(s.exit_fraction, 1.0);
        assert_eq!(s.paths[0].exit_step, Some(4));
    }

    #[test]
    fn dyson_two_particles_stay_ordered() {
        let e = simulate_dyson(&[-0.5, 0.5], 2.0, &SimOptions::new(50, 1e-3, 4)).unwrap();
        for p in &e.paths {
            if p.exit_step.is_none() {
                assert!(p.states.iter().all(|x| x[1] > x[0]));
            }
        }
    }

    #[test]
    fn refinement_rows() {
        let spec = box_spec(0.2);
        let rows = dt_refinement_check(&[1e-2], &spec.domain, |dt| {
            simulate_uncontrolled(&spec, 0.2, &SimOptions::new(20, dt, 1))
        })
        .unwrap();
        assert_eq!(rows.len(), 1);
        let zero = vec![
            DtRow {
                dt: 1e-2,
                exit_fraction: 0.0,
                standard_error: 0.0,
            },
            DtRow {
                dt: 1e-3,
                exit_fraction: 0.0,
                standard_error: 0.0,
            },
        ];
        assert!(exit_fraction_non_increasing(&zero, 2.0));
    }
}
