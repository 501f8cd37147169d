//! Pointwise range test `G u = s` and the certification report.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::score::ScoreField;
use crate::error::{Error, Result};
use crate::problem::ProblemSpec;

/// Singular values below this fraction of the largest are treated as zero.
pub const RANK_CUTOFF: f64 = 1e-10;
pub const DEFAULT_TOLERANCE: f64 = 1e-6;

/// Pseudoinverse and nullspace of a fixed `n x m` input matrix.
#[derive(Debug, Clone)]
pub struct RangeSolver {
    g: DMatrix<f64>,
    pinv: DMatrix<f64>,
    nullspace: DMatrix<f64>,
    rank: usize,
}

impl RangeSolver {
    pub fn new(g: &DMatrix<f64>) -> Result<Self> {
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "input matrix",
                t: f64::NAN,
            });
        }
        let (n, m) = g.shape();
        // Pad to at least m rows so the SVD returns all m right singular vectors.
        let rows = n.max(m);
        let mut padded = DMatrix::zeros(rows, m);
        padded.view_mut((0, 0), (n, m)).copy_from(g);
        let svd = padded.svd(true, true);
        let u = svd.u.expect("requested U");
        let vt = svd.v_t.expect("requested V^T");
        let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let cut = RANK_CUTOFF * smax;
        let mut pinv = DMatrix::zeros(m, n);
        let mut null_cols = Vec::new();
        let mut rank = 0;
        for (k, &sv) in svd.singular_values.iter().enumerate() {
            let v = vt.row(k).transpose();
            if sv > cut && sv > 0.0 {
                rank += 1;
                let uk = u.column(k).rows(0, n).into_owned();
                pinv += &v * uk.transpose() / sv;
            } else {
                null_cols.push(v);
            }
        }
        let nullspace = if null_cols.is_empty() {
            DMatrix::zeros(m, 0)
        } else {
            DMatrix::from_columns(&null_cols)
        };
        Ok(RangeSolver {
            g: g.clone(),
            pinv,
            nullspace,
            rank,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Orthonormal basis of `ker G`, `m x (m - rank)`.
    pub fn nullspace(&self) -> &DMatrix<f64> {
        &self.nullspace
    }

    /// Full row rank: every `s` is in the range.
    pub fn is_surjective(&self) -> bool {
        self.rank == self.g.nrows()
    }

    /// Min-norm least-squares `u` and `||G u - s||_2`.
    pub fn solve(&self, s: &[f64]) -> (Vec<f64>, f64) {
        let s = DVector::from_column_slice(s);
        let u = &self.pinv * &s;
        let r = (&self.g * &u - &s).norm();
        (u.iter().cloned().collect(), r)
    }
}

/// Outcome of [`range_test`].
#[derive(Debug, Clone, PartialEq)]
pub struct RangeTest {
    pub in_range: bool,
    pub residual: f64,
    pub u: Vec<f64>,
}

/// Is `s` in the range of `G`? In range iff `||G u - s|| <= tol max(1, ||s||)`.
pub fn range_test(g: &DMatrix<f64>, s: &[f64], tol: f64) -> Result<RangeTest> {
    if s.len() != g.nrows() {
        return Err(Error::DimensionMismatch {
            expected: g.nrows(),
            actual: s.len(),
        });
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "score",
            t: f64::NAN,
        });
    }
    let (u, residual) = RangeSolver::new(g)?.solve(s);
    let norm = s.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(RangeTest {
        in_range: residual <= tol * norm.max(1.0),
        residual,
        u,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Certified,
    Falsified,
}

/// Node attaining the largest normalized residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub t: f64,
    pub x: Vec<f64>,
    pub node: usize,
    pub slice: usize,
    /// `||G u - s|| / max(1, ||s||)`
    pub residual: f64,
    /// `||G u - s||`
    pub raw_residual: f64,
    pub score: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub verdict: Verdict,
    pub tolerance: f64,
    pub max_residual: f64,
    pub mean_residual: f64,
    pub count_above: usize,
    pub nodes_checked: usize,
    pub witness: Option<Witness>,
    pub input_rank: usize,
    /// `G` is constant with full row rank, so `G u = s` is solvable at every
    /// `(t, x)`, not only at grid nodes.
    pub strengthened: bool,
    /// Score values that hit the magnitude clamp.
    pub clamped_nodes: usize,
}

/// Controller data at every checked node.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlLaw {
    pub input_dim: usize,
    pub times: Vec<f64>,
    pub nodes: Vec<usize>,
    /// `u[j][k * m + i]` for slice `j`, node `nodes[k]`.
    pub u: Vec<Vec<f64>>,
    pub residual: Vec<Vec<f64>>,
    /// `ker G`; the input matrix is state-independent.
    pub nullspace: DMatrix<f64>,
}

/// Range test at every interior node of every score slice.
///
/// The verdict uses the normalized residual `||G u - s|| / max(1, ||s||)`.
/// Ties for the witness go to the earliest slice, then the lowest node index.
pub fn certify_problem(
    spec: &ProblemSpec,
    score: &ScoreField,
    tol: f64,
) -> Result<(CertificationReport, ControlLaw)> {
    let grid = score.grid();
    if grid.dim() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            actual: grid.dim(),
        });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let g = spec.dynamics.input_matrix(0.0, &spec.x0);
    let solver = RangeSolver::new(g)?;
    let m = g.ncols();
    let nodes = grid.interior_nodes().to_vec();

    let per_slice: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = (0..score.times().len())
        .into_par_iter()
        .map(|j| {
            let mut u_all = Vec::with_capacity(nodes.len() * m);
            let mut raw = Vec::with_capacity(nodes.len());
            let mut normalized = Vec::with_capacity(nodes.len());
            for &p in &nodes {
                let s = score.node_value(j, p);
                let (u, r) = solver.solve(s);
                let norm = s.iter().map(|v| v * v).sum::<f64>().sqrt();
                u_all.extend(u);
                raw.push(r);
                normalized.push(r / norm.max(1.0));
            }
            (u_all, raw, normalized)
        })
        .collect();

    let mut best: Option<(usize, usize, f64)> = None;
    let mut sum = 0.0;
    let mut count_above = 0;
    let mut checked = 0;
    for (j, (_, _, normalized)) in per_slice.iter().enumerate() {
        for (k, &r) in normalized.iter().enumerate() {
            if !r.is_finite() {
                return Err(Error::NonFinite {
                    what: "range residual",
                    t: score.times()[j],
                });
            }
            checked += 1;
            sum += r;
            count_above += (r > tol) as usize;
            if best.map_or(true, |b| r > b.2) {
                best = Some((j, k, r));
            }
        }
    }
    let max_residual = best.map_or(0.0, |b| b.2);
    let witness = best.map(|(j, k, r)| Witness {
        t: score.times()[j],
        x: grid.coords(nodes[k]),
        node: nodes[k],
        slice: j,
        residual: r,
        raw_residual: per_slice[j].1[k],
        score: score.node_value(j, nodes[k]).to_vec(),
    });
    let report = CertificationReport {
        verdict: if count_above == 0 {
            Verdict::Certified
        } else {
            Verdict::Falsified
        },
        tolerance: tol,
        max_residual,
        mean_residual: if checked > 0 {
            sum / checked as f64
        } else {
            0.0
        },
        count_above,
        nodes_checked: checked,
        witness,
        input_rank: solver.rank(),
        strengthened: solver.is_surjective(),
        clamped_nodes: score.clamped_count(),
    };
    let (u, residual) = per_slice.into_iter().map(|(u, raw, _)| (u, raw)).unzip();
    let law = ControlLaw {
        input_dim: m,
        times: score.times().to_vec(),
        nodes,
        u,
        residual,
        nullspace: solver.nullspace().clone(),
    };
    Ok((report, law))
}
