use num_complex::Complex64;

use super::fft;
use super::grid::Grid;
use crate::error::{Error, Result};

/// Relative tolerance for the Hermitian-symmetry check on real fields.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// A real scalar field held as discrete Fourier coefficients.
///
/// `coefficient(k)` approximates `(1/L^d) ∫ f(x) e^{-ik·x} dx`, so the
/// physical samples are recovered by the unnormalized inverse sum.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        Field {
            grid,
            coeffs: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_coefficients(grid: Grid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} coefficients for a lattice of {} points",
                coeffs.len(),
                grid.len()
            )));
        }
        Ok(Field { grid, coeffs })
    }

    pub fn from_physical(grid: Grid, values: &[f64]) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} samples for a lattice of {} points",
                values.len(),
                grid.len()
            )));
        }
        let mut coeffs = fft::forward_real(&grid, values);
        let norm = 1.0 / grid.len() as f64;
        coeffs.iter_mut().for_each(|c| *c *= norm);
        Ok(Field { grid, coeffs })
    }

    /// Samples `f(x)` at every lattice point (minimum-image coordinates).
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let dx = grid.spacing();
        let values: Vec<f64> = (0..grid.len())
            .map(|flat| {
                let idx = grid.unflatten(flat);
                let mut x = [0.0; 3];
                for a in 0..grid.dim() {
                    x[a] = dx * grid.signed_index(idx[a]) as f64;
                }
                f(&x[..grid.dim()])
            })
            .collect();
        Field::from_physical(grid, &values).expect("lattice-sized buffer")
    }

    /// Field whose coefficient at each lattice point is `symbol(k)`.
    pub fn from_symbol(grid: Grid, symbol: impl Fn(&[f64]) -> Complex64) -> Self {
        let dk = grid.dk();
        let coeffs = (0..grid.len())
            .map(|flat| {
                let idx = grid.unflatten(flat);
                let mut k = [0.0; 3];
                for a in 0..grid.dim() {
                    k[a] = dk * grid.signed_index(idx[a]) as f64;
                }
                symbol(&k[..grid.dim()])
            })
            .collect();
        Field { grid, coeffs }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coefficients_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coefficients(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Largest Hermitian defect `|c(-k) - conj c(k)|` relative to `max |c|`.
    pub fn symmetry_defect(&self) -> f64 {
        let scale = self.coeffs.iter().map(|c| c.norm_sqr()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        let m = self.grid.points();
        let neg = |i: usize| (m - i) % m;
        let c = &self.coeffs;
        let mut worst = 0.0f64;
        let mut visit = |i: usize, j: usize| worst = worst.max((c[j] - c[i].conj()).norm_sqr());
        match self.grid.dim() {
            2 => {
                for a in 0..m {
                    for b in 0..m {
                        visit(a * m + b, neg(a) * m + neg(b));
                    }
                }
            }
            _ => {
                for a in 0..m {
                    for b in 0..m {
                        for e in 0..m {
                            visit((a * m + b) * m + e, (neg(a) * m + neg(b)) * m + neg(e));
                        }
                    }
                }
            }
        }
        (worst / scale).sqrt()
    }

    /// Inverse transform to lattice samples.
    ///
    /// Fails when the coefficients are not Hermitian-symmetric, i.e. do not
    /// describe a real field.
    pub fn to_physical(&self) -> Result<Vec<f64>> {
        let defect = self.symmetry_defect();
        if defect > SYMMETRY_TOLERANCE {
            return Err(Error::SymmetryViolation { defect });
        }
        Ok(self.physical_unchecked())
    }

    pub(crate) fn physical_unchecked(&self) -> Vec<f64> {
        fft::inverse_real(&self.grid, &self.coeffs)
    }

    /// Spatial mean, i.e. the `k = 0` coefficient.
    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    /// Zeroes the `k = 0` mode and returns the magnitude that was removed.
    pub fn remove_mean(&mut self) -> f64 {
        let removed = self.coeffs[0].norm();
        self.coeffs[0] = Complex64::new(0.0, 0.0);
        removed
    }

    pub fn scaled(&self, factor: f64) -> Field {
        Field {
            grid: self.grid,
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Field, op: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Field> {
        self.ensure_same_grid(other)?;
        Ok(Field {
            grid: self.grid,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| op(a, b))
                .collect(),
        })
    }

    pub(crate) fn ensure_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!(
                "{:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        Ok(())
    }

    /// Multiplies each coefficient by `symbol(|k|²)`.
    pub fn apply_multiplier(&self, symbol: impl Fn(f64) -> f64) -> Field {
        let dk2 = self.grid.dk() * self.grid.dk();
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * symbol(dk2 * self.grid.index_norm_sq(i) as f64))
            .collect();
        Field {
            grid: self.grid,
            coeffs,
        }
    }

    /// Pointwise product with a physical-space multiplier.
    pub fn multiply_physical(&self, multiplier: &[f64]) -> Result<Field> {
        if multiplier.len() != self.grid.len() {
            return Err(Error::GridMismatch("multiplier length".into()));
        }
        let values = self.to_physical()?;
        let prod: Vec<f64> = values.iter().zip(multiplier).map(|(a, b)| a * b).collect();
        Field::from_physical(self.grid, &prod)
    }

    /// `Σ |c(k)|² L^d`, the squared L² norm by Plancherel.
    pub fn spectral_energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.grid.volume()
    }

    /// Transfers the field to a grid with the same period and dimension but
    /// a different resolution: modes present on both lattices are copied,
    /// modes absent from the target are dropped, and the target's Nyquist
    /// modes are left at zero.
    pub fn resample(&self, target: Grid) -> Result<Field> {
        if target.dim() != self.grid.dim() || target.period() != self.grid.period() {
            return Err(Error::GridMismatch(
                "resampling requires equal dimension and period".into(),
            ));
        }
        let mut out = Field::zeros(target);
        let half_src = self.grid.points() as i64 / 2;
        let half_dst = target.points() as i64 / 2;
        let limit = half_src.min(half_dst);
        let m_dst = target.points() as i64;
        for (i, c) in self.coeffs.iter().enumerate() {
            let idx = self.grid.unflatten(i);
            let mut dst = [0usize; 3];
            let mut keep = true;
            for a in 0..self.grid.dim() {
                let n = self.grid.signed_index(idx[a]);
                if n.abs() >= limit {
                    keep = false;
                    break;
                }
                dst[a] = n.rem_euclid(m_dst) as usize;
            }
            if keep {
                out.coeffs[target.flatten(dst)] = *c;
            }
        }
        Ok(out)
    }
}
