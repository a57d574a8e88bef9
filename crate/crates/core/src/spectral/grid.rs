use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Periodic lattice `[-L/2, L/2)^d` sampled with `M` points per axis.
///
/// The dual lattice is `(2π/L)·{-M/2, …, M/2-1}^d`. Arrays are stored
/// row-major with the last axis contiguous, and index `i` along an axis maps
/// to the integer wavenumber `i` for `i < M/2` and `i - M` otherwise.
/// Physical coordinates use the same minimum-image convention, so the
/// origin sits at lattice index 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    period: f64,
    points: usize,
}

impl Grid {
    pub fn new(dim: usize, period: f64, points: usize) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::invalid("dimension", format!("d = {dim}, supported: 2, 3")));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::invalid("period", format!("L = {period} must be positive")));
        }
        if points < 2 || points % 2 != 0 {
            return Err(Error::invalid(
                "points_per_axis",
                format!("M = {points} must be even and at least 2"),
            ));
        }
        Ok(Grid { dim, period, points })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn points(&self) -> usize {
        self.points
    }

    /// Total number of lattice points, `M^d`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.period / self.points as f64
    }

    /// Rectangle-rule quadrature weight `Δx^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Box volume `L^d`.
    pub fn volume(&self) -> f64 {
        self.period.powi(self.dim as i32)
    }

    /// Dual lattice spacing `2π/L`.
    pub fn dk(&self) -> f64 {
        2.0 * PI / self.period
    }

    /// Nyquist magnitude `π·M/L`.
    pub fn k_max(&self) -> f64 {
        PI * self.points as f64 / self.period
    }

    /// Signed integer wavenumber (or minimum-image offset) of axis index `i`.
    #[inline]
    pub fn signed_index(&self, i: usize) -> i64 {
        let m = self.points as i64;
        let i = i as i64;
        if i < m / 2 {
            i
        } else {
            i - m
        }
    }

    /// Index of `-n` along one axis.
    #[inline]
    pub fn negated_index(&self, i: usize) -> usize {
        (self.points - i) % self.points
    }

    /// Splits a flat index into per-axis indices (unused axes are 0).
    #[inline]
    pub fn unflatten(&self, flat: usize) -> [usize; 3] {
        let m = self.points;
        match self.dim {
            2 => [flat / m, flat % m, 0],
            _ => [flat / (m * m), (flat / m) % m, flat % m],
        }
    }

    #[inline]
    pub fn flatten(&self, idx: [usize; 3]) -> usize {
        let m = self.points;
        match self.dim {
            2 => idx[0] * m + idx[1],
            _ => (idx[0] * m + idx[1]) * m + idx[2],
        }
    }

    /// Squared integer norm `|n|²` of the wavevector at `flat`.
    #[inline]
    pub fn index_norm_sq(&self, flat: usize) -> i64 {
        let idx = self.unflatten(flat);
        (0..self.dim)
            .map(|a| {
                let n = self.signed_index(idx[a]);
                n * n
            })
            .sum()
    }

    /// Largest absolute per-axis wavenumber index at `flat`.
    #[inline]
    pub fn index_max_abs(&self, flat: usize) -> i64 {
        let idx = self.unflatten(flat);
        (0..self.dim)
            .map(|a| self.signed_index(idx[a]).abs())
            .max()
            .unwrap_or(0)
    }

    /// Flat index of the wavevector `-k`.
    #[inline]
    pub fn negated_flat(&self, flat: usize) -> usize {
        let mut idx = self.unflatten(flat);
        for a in idx.iter_mut().take(self.dim) {
            *a = self.negated_index(*a);
        }
        self.flatten(idx)
    }

    /// `|k|²` for every lattice point.
    pub fn wavenumber_sq(&self) -> Vec<f64> {
        let dk2 = self.dk() * self.dk();
        (0..self.len())
            .map(|i| dk2 * self.index_norm_sq(i) as f64)
            .collect()
    }

    /// `|k|` for every lattice point.
    pub fn wavenumber_abs(&self) -> Vec<f64> {
        self.wavenumber_sq().into_iter().map(f64::sqrt).collect()
    }

    /// Minimum-image distance `|x|` from the origin for every lattice point.
    pub fn radius(&self) -> Vec<f64> {
        let dx = self.spacing();
        (0..self.len())
            .map(|i| dx * (self.index_norm_sq(i) as f64).sqrt())
            .collect()
    }

    /// Copy of this grid with a different number of points per axis.
    pub fn with_points(&self, points: usize) -> Result<Grid> {
        Grid::new(self.dim, self.period, points)
    }
}
