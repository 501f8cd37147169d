//! Score fields `s = Sigma grad log h` on grid nodes, with interpolation.

use nalgebra::DMatrix;

use crate::eigen::{AnalyticEigenpair, EigenPair};
use crate::error::{Error, Result};
use crate::pde::{Grid, SpaceTimeField};
use crate::problem::DynamicsField;

/// Floor for `h` inside the logarithm, relative to the field maximum.
pub const DEFAULT_EPS: f64 = 1e-12;
/// Clamp on the Euclidean norm of the score.
pub const DEFAULT_S_MAX: f64 = 1e3;

const MAX_DIM: usize = 8;

/// Score values on every grid node for each stored time.
///
/// Interior nodes carry the computed score. Non-interior nodes carry values
/// copied from nearby interior nodes, only so that multilinear interpolation
/// is defined in cells that straddle the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreField {
    grid: Grid,
    times: Vec<f64>,
    /// `values[j][p * n + a]`
    values: Vec<Vec<f64>>,
    time_invariant: bool,
    pub eps: f64,
    pub s_max: f64,
    clamped: usize,
}

/// Derivative of `v` along axis `a` at `idx`: central when both neighbours are
/// interior, second-order one-sided into the interior when only one side is,
/// and central through the Dirichlet values otherwise.
fn partial(grid: &Grid, v: &[f64], idx: &[usize], a: usize, off: &mut [i64]) -> f64 {
    let h = grid.spacing()[a];
    off.iter_mut().for_each(|o| *o = 0);
    let mut at = |k: i64| {
        off[a] = k;
        grid.offset_node(idx, off)
    };
    let (p, m, p2, m2) = (at(1), at(-1), at(2), at(-2));
    let c = v[grid.flat_index(idx)];
    let inner = |q: Option<usize>| q.filter(|&q| grid.is_interior(q));
    match (inner(p), inner(m)) {
        (Some(p), Some(m)) => (v[p] - v[m]) / (2.0 * h),
        (Some(p), None) => match inner(p2) {
            Some(p2) => (-3.0 * c + 4.0 * v[p] - v[p2]) / (2.0 * h),
            None => (v[p] - m.map_or(0.0, |m| v[m])) / (2.0 * h),
        },
        (None, Some(m)) => match inner(m2) {
            Some(m2) => (3.0 * c - 4.0 * v[m] + v[m2]) / (2.0 * h),
            None => (p.map_or(0.0, |p| v[p]) - v[m]) / (2.0 * h),
        },
        (None, None) => (p.map_or(0.0, |p| v[p]) - m.map_or(0.0, |m| v[m])) / (2.0 * h),
    }
}

fn clamp_norm(s: &mut [f64], s_max: f64) -> bool {
    let norm = s.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > s_max {
        s.iter_mut().for_each(|v| *v *= s_max / norm);
        true
    } else {
        false
    }
}

fn apply_sigma(sigma: &DMatrix<f64>, g: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = (0..g.len()).map(|k| sigma[(i, k)] * g[k]).sum();
    }
}

/// Score of one slice of node values. Returns the number of clamped nodes.
fn slice_score(
    grid: &Grid,
    dynamics: &DynamicsField,
    t: f64,
    v: &[f64],
    floor: f64,
    s_max: f64,
    out: &mut [f64],
) -> usize {
    let n = grid.dim();
    let mut idx = vec![0; n];
    let mut off = vec![0i64; n];
    let mut g = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut clamped = 0;
    for &p in grid.interior_nodes() {
        grid.multi_index_into(p, &mut idx);
        grid.coords_into(p, &mut x);
        let denom = v[p].max(floor);
        for a in 0..n {
            g[a] = partial(grid, v, &idx, a, &mut off) / denom;
        }
        let s = &mut out[p * n..(p + 1) * n];
        apply_sigma(dynamics.diffusion_tensor(t, &x), &g, s);
        clamped += clamp_norm(s, s_max) as usize;
    }
    clamped
}

/// Gives non-interior nodes the mean of already-filled neighbours, two rings deep.
fn ring_fill(grid: &Grid, values: &mut [f64]) {
    let n = grid.dim();
    let mut filled: Vec<bool> = grid.interior_mask().to_vec();
    let offsets: Vec<Vec<i64>> = (0..3usize.pow(n as u32))
        .map(|mut k| {
            (0..n)
                .map(|_| {
                    let d = (k % 3) as i64 - 1;
                    k /= 3;
                    d
                })
                .collect()
        })
        .filter(|o: &Vec<i64>| o.iter().any(|&d| d != 0))
        .collect();
    let mut idx = vec![0; n];
    for _ in 0..2 {
        let mut updates = Vec::new();
        for p in 0..grid.node_count() {
            if filled[p] {
                continue;
            }
            grid.multi_index_into(p, &mut idx);
            let mut acc = vec![0.0; n];
            let mut count = 0;
            for off in &offsets {
                if let Some(q) = grid.offset_node(&idx, off) {
                    if filled[q] {
                        for a in 0..n {
                            acc[a] += values[q * n + a];
                        }
                        count += 1;
                    }
                }
            }
            if count > 0 {
                updates.push((
                    p,
                    acc.into_iter()
                        .map(|s| s / count as f64)
                        .collect::<Vec<_>>(),
                ));
            }
        }
        for (p, s) in updates {
            values[p * n..(p + 1) * n].copy_from_slice(&s);
            filled[p] = true;
        }
    }
}

/// `Sigma grad h / max(h, eps * max h)` from a finite-horizon field.
///
/// The terminal slice is an indicator and is not differentiated; for times
/// past the last interior slice the score of that slice is held.
pub fn score_finite(
    field: &SpaceTimeField,
    grid: &Grid,
    dynamics: &DynamicsField,
    eps: f64,
    s_max: f64,
) -> Result<ScoreField> {
    if field.node_count() != grid.node_count() {
        return Err(Error::DimensionMismatch {
            expected: grid.node_count(),
            actual: field.node_count(),
        });
    }
    if dynamics.dim() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            actual: dynamics.dim(),
        });
    }
    if field.times().len() < 2 {
        return Err(Error::InvalidArgument(
            "score needs at least one slice before the horizon".into(),
        ));
    }
    let n = grid.dim();
    let fmax = field.slices().iter().flatten().cloned().fold(0.0, f64::max);
    let floor = eps * fmax;
    let stored = field.times().len() - 1;
    let mut values = Vec::with_capacity(stored);
    let mut clamped = 0;
    for j in 0..stored {
        let mut out = vec![0.0; grid.node_count() * n];
        clamped += slice_score(
            grid,
            dynamics,
            field.times()[j],
            field.slice(j),
            floor,
            s_max,
            &mut out,
        );
        ring_fill(grid, &mut out);
        values.push(out);
    }
    Ok(ScoreField {
        grid: grid.clone(),
        times: field.times()[..stored].to_vec(),
        values,
        time_invariant: false,
        eps,
        s_max,
        clamped,
    })
}

/// `Sigma grad psi_0 / max(psi_0, eps * max psi_0)` from a numeric eigenpair on `grid`.
pub fn score_infinite(
    pair: &EigenPair,
    grid: &Grid,
    dynamics: &DynamicsField,
    eps: f64,
    s_max: f64,
) -> Result<ScoreField> {
    if pair.psi.len() != grid.interior_count() {
        return Err(Error::DimensionMismatch {
            expected: grid.interior_count(),
            actual: pair.psi.len(),
        });
    }
    if let Some(&bad) = pair.psi.iter().find(|&&v| !(v > 0.0)) {
        return Err(Error::NotPrincipal { min_entry: bad });
    }
    let mut v = vec![0.0; grid.node_count()];
    for (&p, &val) in grid.interior_nodes().iter().zip(&pair.psi) {
        v[p] = val;
    }
    let floor = eps * pair.psi.iter().cloned().fold(0.0, f64::max);
    let mut out = vec![0.0; grid.node_count() * grid.dim()];
    let clamped = slice_score(grid, dynamics, 0.0, &v, floor, s_max, &mut out);
    ring_fill(grid, &mut out);
    Ok(ScoreField {
        grid: grid.clone(),
        times: vec![0.0],
        values: vec![out],
        time_invariant: true,
        eps,
        s_max,
        clamped,
    })
}

/// Score from a closed-form eigenfunction, `Sigma grad log psi_0` at each node.
pub fn score_infinite_analytic(
    pair: &AnalyticEigenpair,
    grid: &Grid,
    dynamics: &DynamicsField,
    s_max: f64,
) -> Result<ScoreField> {
    let n = grid.dim();
    let mut out = vec![0.0; grid.node_count() * n];
    let mut x = vec![0.0; n];
    let mut clamped = 0;
    for &p in grid.interior_nodes() {
        grid.coords_into(p, &mut x);
        let g = pair.grad_log_psi(&x);
        if g.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: g.len(),
            });
        }
        let s = &mut out[p * n..(p + 1) * n];
        apply_sigma(dynamics.diffusion_tensor(0.0, &x), &g, s);
        clamped += clamp_norm(s, s_max) as usize;
    }
    ring_fill(grid, &mut out);
    Ok(ScoreField {
        grid: grid.clone(),
        times: vec![0.0],
        values: vec![out],
        time_invariant: true,
        eps: 0.0,
        s_max,
        clamped,
    })
}

impl ScoreField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// Times of the stored slices (one entry for a time-invariant field).
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn is_time_invariant(&self) -> bool {
        self.time_invariant
    }

    /// Number of interior node values that hit the clamp.
    pub fn clamped_count(&self) -> usize {
        self.clamped
    }

    /// Score at grid node `p` of slice `j`.
    pub fn node_value(&self, j: usize, p: usize) -> &[f64] {
        let n = self.dim();
        &self.values[j][p * n..(p + 1) * n]
    }

    fn spatial(&self, j: usize, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        let (origin, spacing, counts, strides) = (
            self.grid.origin(),
            self.grid.spacing(),
            self.grid.counts(),
            self.grid.strides(),
        );
        let mut base = 0usize;
        assert!(
            n <= MAX_DIM,
            "interpolation supports at most {MAX_DIM} dimensions"
        );
        let mut frac = [0.0f64; MAX_DIM];
        let mut step = [0usize; MAX_DIM];
        for a in 0..n {
            let u = (x[a] - origin[a]) / spacing[a];
            let i = (u.floor().max(0.0) as usize).min(counts[a].saturating_sub(2));
            frac[a] = (u - i as f64).clamp(0.0, 1.0);
            step[a] = if counts[a] > 1 { strides[a] } else { 0 };
            base += i * strides[a];
        }
        out.iter_mut().for_each(|o| *o = 0.0);
        for corner in 0..(1usize << n) {
            let mut w = 1.0;
            let mut p = base;
            for a in 0..n {
                if corner >> a & 1 == 1 {
                    w *= frac[a];
                    p += step[a];
                } else {
                    w *= 1.0 - frac[a];
                }
            }
            if w == 0.0 {
                continue;
            }
            let v = &self.values[j][p * n..(p + 1) * n];
            for a in 0..n {
                out[a] += w * v[a];
            }
        }
    }

    /// Multilinear in space, linear in time, held constant outside the stored times.
    pub fn eval_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let k = self.times.len();
        if self.time_invariant || k == 1 || t <= self.times[0] {
            return self.spatial(0, x, out);
        }
        if t >= self.times[k - 1] {
            return self.spatial(k - 1, x, out);
        }
        let j = self.times.partition_point(|&s| s <= t) - 1;
        let w = (t - self.times[j]) / (self.times[j + 1] - self.times[j]);
        let mut tmp = [0.0; MAX_DIM];
        let tmp = &mut tmp[..self.dim()];
        self.spatial(j, x, out);
        self.spatial(j + 1, x, tmp);
        for (o, &b) in out.iter_mut().zip(tmp.iter()) {
            *o = (1.0 - w) * *o + w * b;
        }
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(t, x, &mut out);
        out
    }
}
