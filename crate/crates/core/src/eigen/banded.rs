//! Banded LU factorization without pivoting.
//!
//! `-L_h` is weakly diagonally dominant whenever the cell Peclet number is
//! below one, which holds for every grid used here, so no pivoting is needed.
//! A zero pivot is reported rather than worked around.

use crate::error::{Error, Result};
use crate::pde::CsrMatrix;

#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    bw: usize,
    // row i holds columns i - bw ..= i + bw
    band: Vec<f64>,
}

impl BandedLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.n_rows();
        if n == 0 || a.n_cols() != n {
            return Err(Error::InvalidArgument(format!(
                "cannot factor a {}x{} matrix",
                n,
                a.n_cols()
            )));
        }
        let bw = a.bandwidth();
        let w = 2 * bw + 1;
        let mut band = vec![0.0; n * w];
        for i in 0..n {
            for (j, v) in a.row(i) {
                band[i * w + j + bw - i] = v;
            }
        }
        for k in 0..n {
            let pivot = band[k * w + bw];
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::SingularFactorization { row: k });
            }
            let end = (k + bw + 1).min(n);
            for i in (k + 1)..end {
                let ik = i * w + k + bw - i;
                let l = band[ik] / pivot;
                if l == 0.0 {
                    continue;
                }
                band[ik] = l;
                for j in (k + 1)..end {
                    band[i * w + j + bw - i] -= l * band[k * w + j + bw - k];
                }
            }
        }
        Ok(BandedLu { n, bw, band })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, bw, w) = (self.n, self.bw, 2 * self.bw + 1);
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut s = b[i];
            for j in lo..i {
                s -= self.band[i * w + j + bw - i] * b[j];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let hi = (i + bw + 1).min(n);
            let mut s = b[i];
            for j in (i + 1)..hi {
                s -= self.band[i * w + j + bw - i] * b[j];
            }
            b[i] = s / self.band[i * w + bw];
        }
    }
}
