//! Separation-of-variables solutions for the rectangle and the annulus target.

use super::bessel::{bessel_j0_zeros, j0, j1};
use super::field::{FieldMeta, SpaceTimeField};
use super::grid::Grid;
use super::quadrature::adaptive_simpson;
use crate::error::{Error, Result};
use std::f64::consts::PI;

const MODE_CUTOFF: f64 = 1e-12;
const MIN_MODES: usize = 50;
const MAX_MODES: usize = 20_000;

/// Smallest mode count whose first omitted mode has time factor at most
/// `1e-12`, given a per-mode rate `(k / scale)^2 / 2`.
fn modes_for_decay(scale: f64, time_to_go: f64) -> usize {
    if time_to_go <= 0.0 {
        return MIN_MODES;
    }
    let k = scale * (2.0 * -MODE_CUTOFF.ln() / time_to_go).sqrt();
    (k.ceil() as usize).clamp(MIN_MODES, MAX_MODES)
}

/// Survival probability in `Rect(0, l)` ending in `Rect(0, b)`, zero drift, unit noise.
#[derive(Debug, Clone, PartialEq)]
pub struct RectSeries {
    l: Vec<f64>,
    b: Vec<f64>,
}

impl RectSeries {
    pub fn new(l: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if l.is_empty() || l.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: l.len(),
                actual: b.len(),
            });
        }
        if l.iter()
            .zip(&b)
            .any(|(&l, &b)| !(l > 0.0 && b > 0.0 && b <= l))
        {
            return Err(Error::InvalidArgument(
                "need 0 < b <= l on every axis".into(),
            ));
        }
        Ok(RectSeries { l, b })
    }

    pub fn dim(&self) -> usize {
        self.l.len()
    }

    /// Mode count used by [`RectSeries::value`] at this time-to-go.
    pub fn truncation(&self, time_to_go: f64) -> usize {
        let lmax = self.l.iter().cloned().fold(0.0, f64::max);
        modes_for_decay(lmax / PI, time_to_go)
    }

    fn axis_sum(&self, a: usize, time_to_go: f64, xi: f64, modes: usize) -> f64 {
        let (l, b) = (self.l[a], self.b[a]);
        let mut s = 0.0;
        for m in 1..=modes {
            let k = PI * m as f64 / l;
            let decay = (-0.5 * time_to_go * k * k).exp();
            if decay == 0.0 {
                break;
            }
            let c = 2.0 / (PI * m as f64) * (1.0 - (k * b).cos());
            s += c * (k * xi).sin() * decay;
        }
        s
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        for (i, (&xi, &l)) in x.iter().zip(&self.l).enumerate() {
            if !(0.0..=l).contains(&xi) {
                return Err(Error::InvalidArgument(format!(
                    "x[{i}] = {xi} outside [0, {l}]"
                )));
            }
        }
        Ok(())
    }

    /// Truncated series with `modes` terms per axis, clamped to `[0, 1]`.
    pub fn value_with(&self, time_to_go: f64, x: &[f64], modes: usize) -> Result<f64> {
        if time_to_go < 0.0 {
            return Err(Error::InvalidArgument("t exceeds the horizon".into()));
        }
        if modes == 0 {
            return Err(Error::InvalidArgument("need at least one mode".into()));
        }
        self.check_point(x)?;
        let prod: f64 = (0..self.dim())
            .map(|a| self.axis_sum(a, time_to_go, x[a], modes))
            .product();
        Ok(prod.clamp(0.0, 1.0))
    }

    /// Series value with automatic truncation; the exact indicator at `time_to_go == 0`.
    pub fn value(&self, time_to_go: f64, x: &[f64]) -> Result<f64> {
        if time_to_go == 0.0 {
            self.check_point(x)?;
            let inside = x.iter().zip(&self.b).all(|(&xi, &b)| xi > 0.0 && xi < b);
            return Ok(if inside { 1.0 } else { 0.0 });
        }
        self.value_with(time_to_go, x, self.truncation(time_to_go))
    }

    /// Tabulates the series on every grid node; non-interior nodes carry 0
    /// before `horizon`. The series factorizes over axes, so each slice costs
    /// one sum per axis coordinate.
    pub fn field(&self, grid: &Grid, horizon: f64, times: Vec<f64>) -> Result<SpaceTimeField> {
        let n = self.dim();
        if grid.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: grid.dim(),
            });
        }
        if times.iter().any(|&t| t > horizon) {
            return Err(Error::InvalidArgument("t exceeds the horizon".into()));
        }
        let axis_coords: Vec<Vec<f64>> = (0..n)
            .map(|a| {
                (0..grid.counts()[a])
                    .map(|i| grid.origin()[a] + i as f64 * grid.spacing()[a])
                    .collect()
            })
            .collect();
        for (a, xs) in axis_coords.iter().enumerate() {
            if xs
                .iter()
                .any(|&x| !(-1e-12..=self.l[a] + 1e-12).contains(&x))
            {
                return Err(Error::InvalidArgument(
                    "grid extends past the rectangle".into(),
                ));
            }
        }
        let mut slices = Vec::with_capacity(times.len());
        let mut idx = vec![0; n];
        for &t in &times {
            let tau = horizon - t;
            let factors: Vec<Vec<f64>> = axis_coords
                .iter()
                .enumerate()
                .map(|(a, xs)| {
                    xs.iter()
                        .map(|&x| {
                            let x = x.clamp(0.0, self.l[a]);
                            if tau == 0.0 {
                                (x > 0.0 && x < self.b[a]) as u8 as f64
                            } else {
                                self.axis_sum(a, tau, x, self.truncation(tau))
                            }
                        })
                        .collect()
                })
                .collect();
            let slice = (0..grid.node_count())
                .map(|p| {
                    if tau > 0.0 && !grid.is_interior(p) {
                        return 0.0;
                    }
                    grid.multi_index_into(p, &mut idx);
                    let v: f64 = (0..n).map(|a| factors[a][idx[a]]).product();
                    v.clamp(0.0, 1.0)
                })
                .collect();
            slices.push(slice);
        }
        let meta = FieldMeta {
            solver: "rect_series".into(),
            truncation: Some(
                self.truncation(horizon - times.iter().rev().nth(1).copied().unwrap_or(0.0)),
            ),
            ..FieldMeta::default()
        };
        SpaceTimeField::new(times, slices, meta)
    }
}

/// `h_rect_series` with an explicit truncation order.
pub fn h_rect_series(
    l: &[f64],
    b: &[f64],
    horizon: f64,
    t: f64,
    x: &[f64],
    modes: usize,
) -> Result<f64> {
    if t > horizon {
        return Err(Error::InvalidArgument("t exceeds the horizon".into()));
    }
    RectSeries::new(l.to_vec(), b.to_vec())?.value_with(horizon - t, x, modes)
}

/// `int_{r1}^{r2} phi_k r dr / int_0^{r2} phi_k^2 r dr` with `phi_k(r) = J0(z_k r / r2)`.
pub fn annulus_coefficients(r1: f64, r2: f64, k_max: usize) -> Result<Vec<f64>> {
    if !(r1 >= 0.0 && r1 < r2) {
        return Err(Error::InvalidArgument(format!(
            "need 0 <= r1 < r2, got {r1}, {r2}"
        )));
    }
    let zeros = bessel_j0_zeros(k_max)?;
    Ok(zeros
        .iter()
        .map(|&z| {
            let phi = |r: f64| j0(z * r / r2);
            let num = adaptive_simpson(|r| phi(r) * r, r1, r2, 1e-10);
            let sq = |r: f64| phi(r) * phi(r) * r;
            let den = adaptive_simpson(sq, 0.0, r1, 1e-10) + adaptive_simpson(sq, r1, r2, 1e-10);
            num / den
        })
        .collect())
}

/// Survival probability in `Disk(0, r2)` ending in `Annulus(r1, r2)`, as a
/// function of radius.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnulusSeries {
    r1: f64,
    r2: f64,
    zeros: Vec<f64>,
    coeffs: Vec<f64>,
}

impl AnnulusSeries {
    /// Precomputes `k_max` modes.
    pub fn new(r1: f64, r2: f64, k_max: usize) -> Result<Self> {
        if !(r1 > 0.0 && r1 < r2) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < r1 < r2, got {r1}, {r2}"
            )));
        }
        let zeros = bessel_j0_zeros(k_max)?;
        let coeffs = annulus_coefficients(r1, r2, k_max)?;
        Ok(AnnulusSeries {
            r1,
            r2,
            zeros,
            coeffs,
        })
    }

    /// Mode count that [`truncation`](Self::truncation) asks for at this
    /// time-to-go, i.e. the `k_max` worth precomputing.
    pub fn modes_needed(r2: f64, time_to_go: f64) -> usize {
        modes_for_decay(r2 / PI, time_to_go)
    }

    pub fn radii(&self) -> (f64, f64) {
        (self.r1, self.r2)
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn max_modes(&self) -> usize {
        self.coeffs.len()
    }

    pub fn truncation(&self, time_to_go: f64) -> usize {
        modes_for_decay(self.r2 / PI, time_to_go).min(self.max_modes())
    }

    /// Truncated series with the first `modes` terms, clamped to `[0, 1]`.
    pub fn value_with(&self, time_to_go: f64, r: f64, modes: usize) -> Result<f64> {
        if time_to_go < 0.0 {
            return Err(Error::InvalidArgument("t exceeds the horizon".into()));
        }
        if !(0.0..=self.r2).contains(&r) {
            return Err(Error::InvalidArgument(format!(
                "radius {r} outside [0, {}]",
                self.r2
            )));
        }
        if modes == 0 || modes > self.max_modes() {
            return Err(Error::InvalidArgument(format!(
                "mode count {modes} outside 1..={}",
                self.max_modes()
            )));
        }
        let mut s = 0.0;
        for k in 0..modes {
            let a = self.zeros[k] / self.r2;
            let decay = (-0.5 * time_to_go * a * a).exp();
            if decay == 0.0 {
                break;
            }
            s += self.coeffs[k] * j0(a * r) * decay;
        }
        Ok(s.clamp(0.0, 1.0))
    }

    /// Automatic truncation; exact indicator at `time_to_go == 0`.
    pub fn value(&self, time_to_go: f64, r: f64) -> Result<f64> {
        if time_to_go == 0.0 {
            return Ok(if r > self.r1 && r < self.r2 { 1.0 } else { 0.0 });
        }
        self.value_with(time_to_go, r, self.truncation(time_to_go))
    }

    /// Radial derivative of the truncated series (unclamped).
    pub fn radial_derivative(&self, time_to_go: f64, r: f64) -> f64 {
        let modes = self.truncation(time_to_go);
        (0..modes)
            .map(|k| {
                let a = self.zeros[k] / self.r2;
                -self.coeffs[k] * a * j1(a * r) * (-0.5 * time_to_go * a * a).exp()
            })
            .sum()
    }

    /// Tabulates on a planar grid using `r = |x|`.
    pub fn field(&self, grid: &Grid, horizon: f64, times: Vec<f64>) -> Result<SpaceTimeField> {
        if grid.dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                actual: grid.dim(),
            });
        }
        self.tabulate(grid, horizon, times, |x| x[0].hypot(x[1]), true)
    }

    /// Tabulates on a one-dimensional radial grid over `[0, r2]`. Only the node
    /// at `r2` is a true boundary; the node at `r = 0` keeps its series value.
    pub fn radial_field(
        &self,
        grid: &Grid,
        horizon: f64,
        times: Vec<f64>,
    ) -> Result<SpaceTimeField> {
        if grid.dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                actual: grid.dim(),
            });
        }
        self.tabulate(grid, horizon, times, |x| x[0].abs(), false)
    }

    fn tabulate(
        &self,
        grid: &Grid,
        horizon: f64,
        times: Vec<f64>,
        radius: impl Fn(&[f64]) -> f64,
        zero_off_interior: bool,
    ) -> Result<SpaceTimeField> {
        if times.iter().any(|&t| t > horizon) {
            return Err(Error::InvalidArgument("t exceeds the horizon".into()));
        }
        // Radii repeat across symmetric nodes; evaluate the modes once per radius.
        let mut x = vec![0.0; grid.dim()];
        let node_r: Vec<f64> = (0..grid.node_count())
            .map(|p| {
                grid.coords_into(p, &mut x);
                radius(&x).min(self.r2)
            })
            .collect();
        let mut radii = node_r.clone();
        radii.sort_by(f64::total_cmp);
        radii.dedup();
        let slot: Vec<usize> = node_r
            .iter()
            .map(|r| {
                radii
                    .binary_search_by(|q| q.total_cmp(r))
                    .expect("radius present")
            })
            .collect();
        let kmax = times
            .iter()
            .filter(|&&t| t < horizon)
            .map(|&t| self.truncation(horizon - t))
            .max()
            .unwrap_or(0);
        let table: Vec<f64> = radii
            .iter()
            .flat_map(|&r| (0..kmax).map(move |k| (k, r)))
            .map(|(k, r)| j0(self.zeros[k] / self.r2 * r))
            .collect();

        let mut slices = Vec::with_capacity(times.len());
        for &t in &times {
            let tau = horizon - t;
            let per_radius: Vec<f64> = if tau == 0.0 {
                radii
                    .iter()
                    .map(|&r| (r > self.r1 && r < self.r2) as u8 as f64)
                    .collect()
            } else {
                let modes = self.truncation(tau);
                let weights: Vec<f64> = (0..modes)
                    .map(|k| {
                        let a = self.zeros[k] / self.r2;
                        self.coeffs[k] * (-0.5 * tau * a * a).exp()
                    })
                    .collect();
                (0..radii.len())
                    .map(|i| {
                        let row = &table[i * kmax..i * kmax + modes];
                        row.iter()
                            .zip(&weights)
                            .map(|(a, b)| a * b)
                            .sum::<f64>()
                            .clamp(0.0, 1.0)
                    })
                    .collect()
            };
            slices.push(
                (0..grid.node_count())
                    .map(|p| {
                        if zero_off_interior && tau > 0.0 && !grid.is_interior(p) {
                            0.0
                        } else {
                            per_radius[slot[p]]
                        }
                    })
                    .collect(),
            );
        }
        let meta = FieldMeta {
            solver: "annulus_series".into(),
            truncation: Some(kmax),
            ..FieldMeta::default()
        };
        SpaceTimeField::new(times, slices, meta)
    }
}

/// `h_annulus_series` with an explicit truncation order.
pub fn h_annulus_series(
    r1: f64,
    r2: f64,
    horizon: f64,
    t: f64,
    r: f64,
    modes: usize,
) -> Result<f64> {
    if t > horizon {
        return Err(Error::InvalidArgument("t exceeds the horizon".into()));
    }
    AnnulusSeries::new(r1, r2, modes)?.value_with(horizon - t, r, modes)
}
