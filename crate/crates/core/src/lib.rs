//! Pseudospectral simulation and estimate verification for the
//! L²-critical semilinear heat equation `∂ₜh = Δh + μ|h|^{4/d}h` on a
//! periodic box, with rough radial initial data in `Ḣ^{-γ₀}`.

pub mod error;
pub mod estimates;
pub mod heat_flow;
pub mod initial_data;
pub mod littlewood_paley;
pub mod spectral;

pub use error::{Error, Result};
pub use spectral::{Field, Grid, NormSpec};
