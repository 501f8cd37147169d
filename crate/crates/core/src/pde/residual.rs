//! Discrete residual of `dh/dt + L h = 0` for a tabulated field.

use super::field::SpaceTimeField;
use super::generator::{apply_generator_full, discretize_generator};
use super::grid::Grid;
use crate::error::{Error, Result};
use crate::problem::DynamicsField;

/// Max of `|dh/dt + L_h h|` over interior nodes and interior time slices.
///
/// The time derivative is the three-point central difference on the
/// (possibly nonuniform) time grid. Slices whose stencil touches the last
/// slice, or whose time-to-go is below `min_time_to_go`, are skipped; the
/// terminal indicator is not a smooth function. Values stored on non-interior
/// nodes enter through the stencil, so fields with nonzero data there are
/// handled too.
pub fn pde_residual(
    field: &SpaceTimeField,
    grid: &Grid,
    dynamics: &DynamicsField,
    min_time_to_go: f64,
) -> Result<f64> {
    let times = field.times();
    if times.len() < 3 {
        return Err(Error::InvalidArgument(
            "residual needs at least three time slices".into(),
        ));
    }
    if field.node_count() != grid.node_count() {
        return Err(Error::DimensionMismatch {
            expected: grid.node_count(),
            actual: field.node_count(),
        });
    }
    let horizon = field.horizon();
    let last = times.len() - 1;
    let mut worst: f64 = 0.0;
    let mut used = 0;
    for j in 1..last - 1 {
        if horizon - times[j] < min_time_to_go {
            continue;
        }
        let (h1, h2) = (times[j] - times[j - 1], times[j + 1] - times[j]);
        let (a, b, c) = (
            -h2 / (h1 * (h1 + h2)),
            (h2 - h1) / (h1 * h2),
            h1 / (h2 * (h1 + h2)),
        );
        let gen = discretize_generator(grid, dynamics, times[j])?;
        let lh = apply_generator_full(&gen, field.slice(j));
        let (prev, cur, next) = (field.slice(j - 1), field.slice(j), field.slice(j + 1));
        for (row, &p) in gen.node_map.iter().enumerate() {
            let dt = a * prev[p] + b * cur[p] + c * next[p];
            worst = worst.max((dt + lh[row]).abs());
        }
        used += 1;
    }
    if used == 0 {
        return Err(Error::InvalidArgument(
            "no time slice satisfies the residual window".into(),
        ));
    }
    Ok(worst)
}
