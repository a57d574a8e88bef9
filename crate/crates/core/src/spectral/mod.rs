//! Periodic-lattice fields, transforms, quadrature and norm functionals.

mod fft;
mod field;
mod grid;
mod ops;

pub use field::{Field, SYMMETRY_TOLERANCE};
pub use grid::Grid;
pub use ops::{
    critical_power, dealias, dealias_keeps, fractional_laplacian, gradient_norm, lebesgue_norm,
    lp_norm_of_samples, nonlinearity, sobolev_norm, NormSpec,
};
pub(crate) use ops::nonlinearity_of_samples;
