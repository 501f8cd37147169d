//! Principal Dirichlet eigenpair of `-L` for the infinite-horizon problem.

mod banded;

pub use banded::BandedLu;

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::pde::{
    bessel_j, bessel_j0_zeros, discretize_generator, vandermonde, vandermonde_log_gradient,
    CsrMatrix, GeneratorMatrix, Grid,
};
use crate::problem::ProblemSpec;
use crate::rng::{substream, Purpose};

/// `(lambda_0, psi_0)` on interior nodes, `psi_0` scaled to sup-norm 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub lambda: f64,
    pub psi: Vec<f64>,
    /// `||(-L_h) psi - lambda psi||_inf / ||psi||_inf`
    pub residual: f64,
    pub iterations: usize,
}

/// `-L_h + shift I`.
pub fn shifted_operator(gen: &GeneratorMatrix, shift: f64) -> CsrMatrix {
    let a = &gen.matrix;
    let rows = (0..a.n_rows())
        .map(|i| {
            let mut r: Vec<(usize, f64)> = a.row(i).map(|(j, v)| (j, -v)).collect();
            r.push((i, shift));
            r
        })
        .collect();
    CsrMatrix::from_rows(a.n_cols(), rows)
}

/// Principal eigenpair of `-L_h` by inverse power iteration.
pub fn principal_eigenpair(
    gen: &GeneratorMatrix,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<EigenPair> {
    inverse_iteration(&shifted_operator(gen, 0.0), tol, max_iter, seed)
}

/// Discretizes the generator at `t = 0` and solves with a 10^4 iteration budget.
pub fn discretize_and_solve(
    grid: &Grid,
    dynamics: &crate::problem::DynamicsField,
    tol: f64,
) -> Result<EigenPair> {
    let gen = discretize_generator(grid, dynamics, 0.0)?;
    principal_eigenpair(&gen, tol, 10_000, 0)
}

/// Inverse power iteration on `a`, factored once.
///
/// Converges when successive quotients `<v, A v> / <v, v>` differ by less
/// than `tol` and the residual is below `10 tol`. The vector is signed so
/// that its largest-magnitude entry is positive and must then be positive
/// everywhere.
pub fn inverse_iteration(a: &CsrMatrix, tol: f64, max_iter: usize, seed: u64) -> Result<EigenPair> {
    let n = a.n_rows();
    if n == 0 {
        return Err(Error::EmptyInterior);
    }
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::InvalidArgument(
            "need tol > 0 and max_iter > 0".into(),
        ));
    }
    let lu = BandedLu::factor(a)?;
    let mut rng = substream(seed, Purpose::Eigen, 0, 0);
    let mut v: Vec<f64> = (0..n).map(|_| 1.0 + 0.1 * rng.random::<f64>()).collect();
    let mut lambda_prev = f64::NAN;
    let mut last_change = f64::INFINITY;
    for it in 1..=max_iter {
        lu.solve_in_place(&mut v);
        let (imax, _) = v.iter().enumerate().fold((0, 0.0f64), |acc, (i, x)| {
            if x.abs() > acc.1 {
                (i, x.abs())
            } else {
                acc
            }
        });
        let scale = v[imax];
        if scale == 0.0 || !scale.is_finite() {
            return Err(Error::NonFinite {
                what: "inverse iterate",
                t: f64::NAN,
            });
        }
        v.iter_mut().for_each(|x| *x /= scale);
        let av = a.mul_vec(&v);
        let lambda = v.iter().zip(&av).map(|(x, y)| x * y).sum::<f64>()
            / v.iter().map(|x| x * x).sum::<f64>();
        let residual = av
            .iter()
            .zip(&v)
            .map(|(y, x)| (y - lambda * x).abs())
            .fold(0.0, f64::max);
        last_change = (lambda - lambda_prev).abs();
        lambda_prev = lambda;
        if last_change < tol && residual < 10.0 * tol {
            let min_entry = v.iter().cloned().fold(f64::INFINITY, f64::min);
            if !(min_entry > 0.0) {
                return Err(Error::NotPrincipal { min_entry });
            }
            return Ok(EigenPair {
                lambda,
                psi: v,
                residual,
                iterations: it,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        last_change,
    })
}

/// Closed-form principal eigenpairs for zero drift and unit noise.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticEigenpair {
    /// `Rect(0, l)`
    Rect { l: Vec<f64> },
    /// `Disk(0, r1)`, with `z1` the first zero of `J0`. The eigenvalue is
    /// `z1^2 / (2 r1^2)`: the generator is half the Laplacian.
    Disk { r1: f64, z1: f64 },
    /// Weyl chamber with `psi_0` the Vandermonde determinant: harmonic, so
    /// `lambda = 0`, and not normalizable.
    Vandermonde { n: usize },
}

pub fn analytic_eigenpair_rect(l: &[f64]) -> Result<AnalyticEigenpair> {
    if l.is_empty() || l.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument(
            "side lengths must be positive".into(),
        ));
    }
    Ok(AnalyticEigenpair::Rect { l: l.to_vec() })
}

pub fn analytic_eigenpair_weyl(n: usize) -> Result<AnalyticEigenpair> {
    if n < 2 {
        return Err(Error::InvalidArgument(
            "the Weyl chamber needs n >= 2".into(),
        ));
    }
    Ok(AnalyticEigenpair::Vandermonde { n })
}

pub fn analytic_eigenpair_disk(r1: f64) -> Result<AnalyticEigenpair> {
    if !(r1 > 0.0) {
        return Err(Error::InvalidArgument("radius must be positive".into()));
    }
    Ok(AnalyticEigenpair::Disk {
        r1,
        z1: bessel_j0_zeros(1)?[0],
    })
}

impl AnalyticEigenpair {
    pub fn lambda(&self) -> f64 {
        match self {
            AnalyticEigenpair::Rect { l } => {
                0.5 * PI * PI * l.iter().map(|v| 1.0 / (v * v)).sum::<f64>()
            }
            AnalyticEigenpair::Disk { r1, z1 } => 0.5 * (z1 / r1).powi(2),
            AnalyticEigenpair::Vandermonde { .. } => 0.0,
        }
    }

    /// `psi_0(x)`; the disk uses the `L^2`-normalizing constant
    /// `1 / (sqrt(pi) r1 |J0'(z1)|)`.
    pub fn psi(&self, x: &[f64]) -> f64 {
        match self {
            AnalyticEigenpair::Rect { l } => x
                .iter()
                .zip(l)
                .map(|(xi, li)| (PI * xi / li).sin())
                .product(),
            AnalyticEigenpair::Disk { .. } => self.psi_radial(x[0].hypot(x[1])),
            AnalyticEigenpair::Vandermonde { .. } => vandermonde(x).unwrap_or(f64::NAN),
        }
    }

    /// Disk eigenfunction as a function of radius (other shapes: NaN).
    pub fn psi_radial(&self, r: f64) -> f64 {
        match self {
            AnalyticEigenpair::Rect { .. } | AnalyticEigenpair::Vandermonde { .. } => f64::NAN,
            AnalyticEigenpair::Disk { r1, z1 } => {
                let j1 = bessel_j(1, *z1).expect("finite");
                let c = 1.0 / (PI.sqrt() * r1 * j1.abs());
                c * bessel_j(0, z1 * r.abs() / r1).expect("finite")
            }
        }
    }

    /// `grad log psi_0(x)`, for points strictly inside.
    pub fn grad_log_psi(&self, x: &[f64]) -> Vec<f64> {
        match self {
            AnalyticEigenpair::Rect { l } => x
                .iter()
                .zip(l)
                .map(|(xi, li)| {
                    let k = PI / li;
                    k * (k * xi).cos() / (k * xi).sin()
                })
                .collect(),
            AnalyticEigenpair::Disk { r1, z1 } => {
                let r = x[0].hypot(x[1]);
                if r == 0.0 {
                    return vec![0.0, 0.0];
                }
                let a = z1 / r1;
                let d =
                    -a * bessel_j(1, a * r).expect("finite") / bessel_j(0, a * r).expect("finite");
                vec![d * x[0] / r, d * x[1] / r]
            }
            AnalyticEigenpair::Vandermonde { .. } => {
                vandermonde_log_gradient(x).unwrap_or_else(|_| vec![f64::NAN; x.len()])
            }
        }
    }
}

/// One row of a refinement study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementRow {
    pub cells: usize,
    pub h: f64,
    pub lambda: f64,
    pub error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementStudy {
    pub rows: Vec<RefinementRow>,
    /// `log(e_i / e_{i+1}) / log(h_i / h_{i+1})` for consecutive rows.
    pub orders: Vec<f64>,
}

/// Principal eigenvalue on successively finer grids (`cells` per axis),
/// with observed orders against `reference` when it is known.
pub fn refinement_study(
    spec: &ProblemSpec,
    cells: &[usize],
    reference: Option<f64>,
    tol: f64,
    seed: u64,
) -> Result<RefinementStudy> {
    if cells.len() < 2 {
        return Err(Error::InvalidArgument(
            "refinement needs at least two resolutions".into(),
        ));
    }
    let mut rows = Vec::with_capacity(cells.len());
    for &c in cells {
        let grid = Grid::for_domain(&spec.domain, &vec![c; spec.dim()])?;
        let gen = discretize_generator(&grid, &spec.dynamics, 0.0)?;
        let pair = principal_eigenpair(&gen, tol, 10_000, seed)?;
        let h = grid.spacing().iter().cloned().fold(0.0, f64::max);
        rows.push(RefinementRow {
            cells: c,
            h,
            lambda: pair.lambda,
            error: reference.map(|r| (pair.lambda - r).abs()),
        });
    }
    let orders = rows
        .windows(2)
        .filter_map(|w| match (w[0].error, w[1].error) {
            (Some(a), Some(b)) => Some((a / b).ln() / (w[0].h / w[1].h).ln()),
            _ => None,
        })
        .collect();
    Ok(RefinementStudy { rows, orders })
}
