//! Residual of the HJB equation satisfied by `V = log h`.

use super::super::pde::{Grid, SpaceTimeField};
use crate::error::{Error, Result};
use crate::problem::DynamicsField;

/// Nodes closer than this many cells to the Dirichlet layer are skipped.
pub const BOUNDARY_LAYER_CELLS: usize = 3;

/// Max over interior nodes (at least three cells from the boundary) and
/// interior time slices (time-to-go at least `min_time_to_go`) of
///
/// `|dV/dt + 1/2 grad V^T Sigma grad V + <grad V, f> + 1/2 <Sigma, Hess V>|`
///
/// with `V = log max(h, eps * max h)`. The derivatives of `V` are taken
/// through the chain rule from finite differences of `h`
/// (`grad V = grad h / h`, `Hess V = Hess h / h - grad V grad V^T`), which
/// keeps the truncation error bounded near the boundary where `log h` has
/// large derivatives. Requires `G G^T = Sigma`.
pub fn hjb_residual(
    field: &SpaceTimeField,
    grid: &Grid,
    dynamics: &DynamicsField,
    eps: f64,
    min_time_to_go: f64,
) -> Result<f64> {
    let n = grid.dim();
    if field.node_count() != grid.node_count() || dynamics.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: grid.node_count(),
            actual: field.node_count(),
        });
    }
    let times = field.times();
    if times.len() < 4 {
        return Err(Error::InvalidArgument(
            "HJB residual needs at least four time slices".into(),
        ));
    }
    let x0 = grid.coords(grid.interior_nodes()[0]);
    let g = dynamics.input_matrix(0.0, &x0);
    let sigma = dynamics.diffusion_tensor(0.0, &x0);
    let deviation = (g * g.transpose() - sigma).amax();
    if deviation > 1e-9 * sigma.amax().max(1.0) {
        return Err(Error::InputNoiseMismatch { deviation });
    }

    let fmax = field.slices().iter().flatten().cloned().fold(0.0, f64::max);
    let floor = eps * fmax;
    let horizon = field.horizon();
    let last = times.len() - 1;
    let h = grid.spacing();
    let deep: Vec<usize> = grid
        .interior_nodes()
        .iter()
        .copied()
        .filter(|&p| grid.cells_from_boundary(p) >= BOUNDARY_LAYER_CELLS)
        .collect();
    if deep.is_empty() {
        return Err(Error::InvalidArgument(
            "no node is clear of the boundary layer".into(),
        ));
    }

    let mut idx = vec![0; n];
    let mut off = vec![0i64; n];
    let mut x = vec![0.0; n];
    let mut f = vec![0.0; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n * n];
    let mut worst: f64 = 0.0;
    let mut used = false;
    for j in 1..last - 1 {
        if horizon - times[j] < min_time_to_go {
            continue;
        }
        used = true;
        let (h1, h2) = (times[j] - times[j - 1], times[j + 1] - times[j]);
        let (ca, cb, cc) = (
            -h2 / (h1 * (h1 + h2)),
            (h2 - h1) / (h1 * h2),
            h1 / (h2 * (h1 + h2)),
        );
        let (prev, v, next) = (field.slice(j - 1), field.slice(j), field.slice(j + 1));
        for &p in &deep {
            grid.multi_index_into(p, &mut idx);
            grid.coords_into(p, &mut x);
            let at = |o: &[i64]| v[grid.offset_node(&idx, o).expect("deep node has neighbours")];
            for a in 0..n {
                off.iter_mut().for_each(|o| *o = 0);
                off[a] = 1;
                let up = at(&off);
                off[a] = -1;
                let down = at(&off);
                grad[a] = (up - down) / (2.0 * h[a]);
                hess[a * n + a] = (up - 2.0 * v[p] + down) / (h[a] * h[a]);
                for b in (a + 1)..n {
                    let mut cross = 0.0;
                    for (da, db, sign) in [(1, 1, 1.0), (-1, -1, 1.0), (1, -1, -1.0), (-1, 1, -1.0)]
                    {
                        off.iter_mut().for_each(|o| *o = 0);
                        off[a] = da;
                        off[b] = db;
                        cross += sign * at(&off);
                    }
                    hess[a * n + b] = cross / (4.0 * h[a] * h[b]);
                    hess[b * n + a] = hess[a * n + b];
                }
            }
            let hv = v[p].max(floor);
            let dt_v = (ca * prev[p] + cb * v[p] + cc * next[p]) / hv;
            let s = dynamics.diffusion_tensor(times[j], &x);
            dynamics.drift_into(times[j], &x, &mut f);
            let mut quad = 0.0;
            let mut trace = 0.0;
            let mut drift = 0.0;
            for a in 0..n {
                let ga = grad[a] / hv;
                drift += f[a] * ga;
                for b in 0..n {
                    let gb = grad[b] / hv;
                    quad += ga * s[(a, b)] * gb;
                    trace += s[(a, b)] * (hess[a * n + b] / hv - ga * gb);
                }
            }
            let r = dt_v + 0.5 * quad + drift + 0.5 * trace;
            worst = worst.max(r.abs());
        }
    }
    if !used {
        return Err(Error::InvalidArgument(
            "no time slice satisfies the residual window".into(),
        ));
    }
    Ok(worst)
}
