//! The Vandermonde determinant, harmonic on the Weyl chamber.

use crate::error::{Error, Result};

/// `det[x_i^(j-1)] = prod_{i<j} (x_j - x_i)`, positive when `x` is increasing.
pub fn vandermonde(x: &[f64]) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::InvalidArgument(
            "vandermonde needs at least two coordinates".into(),
        ));
    }
    let mut prod = 1.0;
    for j in 1..x.len() {
        for i in 0..j {
            prod *= x[j] - x[i];
        }
    }
    Ok(prod)
}

/// `grad log V`: component `i` is `sum_{j != i} 1 / (x_i - x_j)`.
pub fn vandermonde_log_gradient(x: &[f64]) -> Result<Vec<f64>> {
    if x.len() < 2 {
        return Err(Error::InvalidArgument(
            "vandermonde needs at least two coordinates".into(),
        ));
    }
    let n = x.len();
    let mut out = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let d = x[i] - x[j];
            if d == 0.0 {
                return Err(Error::Coincident {
                    i: i.min(j),
                    j: i.max(j),
                });
            }
            out[i] += 1.0 / d;
        }
    }
    Ok(out)
}
