//! Step two: scores, the range test `G u = s`, and controller diagnostics.

mod hjb;
mod range;
mod score;

pub use hjb::{hjb_residual, BOUNDARY_LAYER_CELLS};
pub use range::{
    certify_problem, range_test, CertificationReport, ControlLaw, RangeSolver, RangeTest, Verdict,
    Witness, DEFAULT_TOLERANCE, RANK_CUTOFF,
};
pub use score::{
    score_finite, score_infinite, score_infinite_analytic, ScoreField, DEFAULT_EPS, DEFAULT_S_MAX,
};

use crate::error::Result;

/// Dyson drift `u_i = sum_{j != i} 1 / (x_i - x_j)`, the gradient of `log |V(x)|`.
pub fn dyson_drift(x: &[f64]) -> Result<Vec<f64>> {
    crate::pde::vandermonde_log_gradient(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dyson_small_cases() {
        assert_eq!(dyson_drift(&[1.0, 2.0, 3.0]).unwrap(), vec![-1.5, 0.0, 1.5]);
        let u = dyson_drift(&[0.3, -1.2]).unwrap();
        assert_eq!(u[0], 1.0 / 1.5);
        assert_eq!(u[0] + u[1], 0.0);
        assert!(dyson_drift(&[1.0, 1.0, 2.0]).is_err());
    }
}
