//! Second-order exponential time differencing (Cox–Matthews ETD2RK).
//!
//! For `u' = Lu + N(u, t)` with diagonal `L = -|k|²`:
//!
//! ```text
//! a       = e^{hL} uₙ + h φ₁(hL) N(uₙ, tₙ)
//! uₙ₊₁    = a + h φ₂(hL) (N(a, tₙ + h) - N(uₙ, tₙ))
//! ```
//!
//! with `φ₁(z) = (e^z - 1)/z` and `φ₂(z) = (e^z - 1 - z)/z²`.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;

use crate::spectral::{Field, Grid};

pub(crate) fn phi1(z: f64) -> f64 {
    if z.abs() < 1e-5 {
        1.0 + z * (0.5 + z / 6.0)
    } else {
        z.exp_m1() / z
    }
}

pub(crate) fn phi2(z: f64) -> f64 {
    if z.abs() < 1e-2 {
        0.5 + z * (1.0 / 6.0 + z * (1.0 / 24.0 + z * (1.0 / 120.0 + z / 720.0)))
    } else {
        (z.exp_m1() - z) / (z * z)
    }
}

/// `(φ₁(z), φ₂(z))` from a single `exp_m1`.
pub(crate) fn phi_pair(z: f64) -> (f64, f64) {
    if z.abs() < 1e-2 {
        (phi1(z), phi2(z))
    } else {
        let em1 = z.exp_m1();
        (em1 / z, (em1 - z) / (z * z))
    }
}

/// Per-mode coefficient tables for one step size.
pub(crate) struct StepTables {
    pub decay: Vec<f64>,
    pub phi1_h: Vec<f64>,
    pub phi2_h: Vec<f64>,
}

pub(crate) struct Etd2 {
    grid: Grid,
    k2: Vec<f64>,
    cache: HashMap<u64, Arc<StepTables>>,
}

const CACHE_LIMIT: usize = 8;

impl Etd2 {
    pub fn new(grid: Grid) -> Self {
        Etd2 {
            grid,
            k2: grid.wavenumber_sq(),
            cache: HashMap::new(),
        }
    }

    pub fn tables(&mut self, h: f64) -> Arc<StepTables> {
        let key = h.to_bits();
        if let Some(t) = self.cache.get(&key) {
            return t.clone();
        }
        if self.cache.len() >= CACHE_LIMIT {
            self.cache.clear();
        }
        let mut decay = Vec::with_capacity(self.k2.len());
        let mut phi1_h = Vec::with_capacity(self.k2.len());
        let mut phi2_h = Vec::with_capacity(self.k2.len());
        for &k2 in &self.k2 {
            let z = -h * k2;
            let (p1, p2) = phi_pair(z);
            decay.push(z.exp());
            phi1_h.push(h * p1);
            phi2_h.push(h * p2);
        }
        let t = Arc::new(StepTables {
            decay,
            phi1_h,
            phi2_h,
        });
        self.cache.insert(key, t.clone());
        t
    }

    /// Exact linear step `e^{hΔ} u`.
    pub fn linear_step(&mut self, u: &Field, h: f64) -> Field {
        let tables = self.tables(h);
        let coeffs = u
            .coefficients()
            .iter()
            .zip(&tables.decay)
            .map(|(c, e)| c * e)
            .collect();
        Field::from_coefficients(self.grid, coeffs).expect("same grid")
    }

    /// One ETD2RK step. `forcing(u, t)` returns the dealiased nonlinear term.
    pub fn step<F>(&mut self, u: &Field, t: f64, h: f64, n_u: &Field, forcing: &mut F) -> Field
    where
        F: FnMut(&Field, f64) -> Field,
    {
        let tables = self.tables(h);
        let a_coeffs: Vec<Complex64> = u
            .coefficients()
            .iter()
            .zip(n_u.coefficients())
            .zip(tables.decay.iter().zip(&tables.phi1_h))
            .map(|((c, n), (e, p1))| c * e + n * p1)
            .collect();
        let a = Field::from_coefficients(self.grid, a_coeffs).expect("same grid");
        let n_a = forcing(&a, t + h);
        let next: Vec<Complex64> = a
            .coefficients()
            .iter()
            .zip(n_a.coefficients().iter().zip(n_u.coefficients()))
            .zip(&tables.phi2_h)
            .map(|((c, (na, nu)), p2)| c + (na - nu) * p2)
            .collect();
        Field::from_coefficients(self.grid, next).expect("same grid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_functions_are_continuous_across_series_switch() {
        for &z in &[-1e-5, -1e-2, -0.5, -3.0, -1e3] {
            let below = z * (1.0 - 1e-9);
            let above = z * (1.0 + 1e-9);
            assert!((phi1(below) - phi1(above)).abs() < 1e-8);
            assert!((phi2(below) - phi2(above)).abs() < 1e-8);
        }
        assert_eq!(phi1(0.0), 1.0);
        assert_eq!(phi2(0.0), 0.5);
        // Reference values at z = -1.
        let e = (-1.0f64).exp();
        assert!((phi1(-1.0) - (1.0 - e)).abs() < 1e-15);
        assert!((phi2(-1.0) - e).abs() < 1e-15);
    }
}
