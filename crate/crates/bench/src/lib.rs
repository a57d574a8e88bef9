//! Shared fixtures for the benchmarks.

use heatlab_core::initial_data::random_band_limited;
use heatlab_core::{Field, Grid};

/// Band-limited noise on a `points`-per-axis grid of period 32.
pub fn noise(dim: usize, points: usize) -> Field {
    let grid = Grid::new(dim, 32.0, points).expect("valid bench grid");
    random_band_limited(grid, 0.5 * grid.k_max(), 7)
}
