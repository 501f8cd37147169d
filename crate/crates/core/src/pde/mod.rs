//! Finite-horizon harmonic functions: grids, the discretized generator,
//! closed-form series and Feynman-Kac estimates.

mod bessel;
mod carre_du_champ;
mod feynman_kac;
mod field;
mod generator;
mod grid;
mod quadrature;
mod residual;
mod series;
mod vandermonde;

pub use bessel::{bessel_j, bessel_j0_zeros};
pub use carre_du_champ::{carre_du_champ_check, generator_polynomial, Polynomial};
pub use feynman_kac::{feynman_kac_field, feynman_kac_field_at, feynman_kac_point};
pub use field::{graded_times, uniform_times, FieldMeta, SpaceTimeField};
pub use generator::{
    apply_generator, apply_generator_full, discretize_generator, CsrMatrix, GeneratorMatrix,
};
pub use grid::{Grid, GridMeta};
pub use quadrature::adaptive_simpson;
pub use residual::pde_residual;
pub use series::{
    annulus_coefficients, h_annulus_series, h_rect_series, AnnulusSeries, RectSeries,
};
pub use vandermonde::{vandermonde, vandermonde_log_gradient};
