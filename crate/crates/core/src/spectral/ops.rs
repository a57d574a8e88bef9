//! Norm functionals and spectral operators on [`Field`]s.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::field::Field;
use super::grid::Grid;
use crate::error::{Error, Result};

/// Which norm to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum NormSpec {
    /// `‖f‖_{L^p}`, `p ∈ [1, ∞]`.
    Lebesgue(f64),
    /// `‖|∇|^s f‖_{L²}` with the `k = 0` mode excluded.
    HomogeneousSobolev(f64),
    /// `(∫ ‖f(t)‖_{L^q}^q dt)^{1/q}`; only meaningful on trajectories.
    SpaceTime(f64),
}

impl NormSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NormSpec::Lebesgue(p) if !(p >= 1.0) => {
                Err(Error::invalid("Lebesgue exponent", format!("p = {p} < 1")))
            }
            NormSpec::HomogeneousSobolev(s) if !s.is_finite() => {
                Err(Error::invalid("Sobolev index", format!("s = {s}")))
            }
            NormSpec::SpaceTime(q) if !(q > 1.0 && q.is_finite()) => {
                Err(Error::invalid("space-time exponent", format!("q = {q} outside (1, ∞)")))
            }
            _ => Ok(()),
        }
    }

    /// Evaluates a spatial norm of a single field.
    pub fn evaluate(&self, f: &Field) -> Result<f64> {
        self.validate()?;
        match *self {
            NormSpec::Lebesgue(p) => lebesgue_norm(f, p),
            NormSpec::HomogeneousSobolev(s) => Ok(sobolev_norm(f, s)),
            NormSpec::SpaceTime(_) => Err(Error::Precondition(
                "space-time norms are evaluated on trajectories".into(),
            )),
        }
    }
}

/// Rectangle-rule `L^p` norm of lattice samples; `p = ∞` is the lattice max.
pub fn lp_norm_of_samples(values: &[f64], cell_volume: f64, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::invalid("Lebesgue exponent", format!("p = {p} < 1")));
    }
    Ok(if p.is_infinite() {
        values.iter().fold(0.0, |m, v| m.max(v.abs()))
    } else if p == 1.0 {
        values.iter().map(|v| v.abs()).sum::<f64>() * cell_volume
    } else if p == 2.0 {
        (values.iter().map(|v| v * v).sum::<f64>() * cell_volume).sqrt()
    } else if p == p.trunc() && p <= 16.0 {
        let n = p as i32;
        (values.iter().map(|v| v.abs().powi(n)).sum::<f64>() * cell_volume).powf(1.0 / p)
    } else {
        (values.iter().map(|v| v.abs().powf(p)).sum::<f64>() * cell_volume).powf(1.0 / p)
    })
}

/// `(Σ_lattice |f(x)|^p Δx^d)^{1/p}`.
pub fn lebesgue_norm(f: &Field, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::invalid("Lebesgue exponent", format!("p = {p} < 1")));
    }
    let values = f.to_physical()?;
    lp_norm_of_samples(&values, f.grid().cell_volume(), p)
}

/// `(Σ_{k≠0} |k|^{2s} |f̂(k)|² L^d)^{1/2}`.
pub fn sobolev_norm(f: &Field, s: f64) -> f64 {
    let grid = f.grid();
    let dk2 = grid.dk() * grid.dk();
    let sum: f64 = f
        .coefficients()
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, c)| {
            let k2 = dk2 * grid.index_norm_sq(i) as f64;
            let w = if s == 1.0 { k2 } else { k2.powf(s) };
            w * c.norm_sqr()
        })
        .sum();
    (sum * grid.volume()).sqrt()
}

/// `|∇|^s`: multiplies `f̂(k)` by `|k|^s`. The `k = 0` mode is kept for
/// `s = 0` and zeroed otherwise.
pub fn fractional_laplacian(f: &Field, s: f64) -> Field {
    if s == 0.0 {
        return f.clone();
    }
    let mut out = f.apply_multiplier(|k2| if k2 > 0.0 { k2.powf(0.5 * s) } else { 0.0 });
    out.coefficients_mut()[0] = Complex64::new(0.0, 0.0);
    out
}

/// `‖∇f‖_{L²}` computed spectrally.
pub fn gradient_norm(f: &Field) -> f64 {
    sobolev_norm(f, 1.0)
}

/// Pointwise `|u|^{4/d} u`, with the `u = 0` branch returning 0.
#[inline]
pub fn critical_power(u: f64, dim: usize) -> f64 {
    match dim {
        2 => u * u * u,
        _ => {
            if u == 0.0 {
                0.0
            } else {
                (4.0 / 3.0 * u.abs().ln()).exp() * u
            }
        }
    }
}

/// True when the wavevector at `flat` survives 2/3-rule truncation
/// (every axis index satisfies `|n| ≤ M/3`).
#[inline]
pub fn dealias_keeps(grid: &Grid, flat: usize) -> bool {
    3 * grid.index_max_abs(flat) <= grid.points() as i64
}

/// Zeroes all modes outside the 2/3-rule cube.
pub fn dealias(f: &mut Field) {
    let grid = *f.grid();
    let m = grid.points();
    let keep: Vec<bool> = (0..m).map(|i| 3 * grid.signed_index(i).abs() <= m as i64).collect();
    let zero = Complex64::new(0.0, 0.0);
    let lines = grid.len() / m;
    for (line, chunk) in f.coefficients_mut().chunks_mut(m).enumerate() {
        // All axes but the last are encoded in the line number.
        let mut rest = line;
        let mut line_kept = true;
        for _ in 0..grid.dim() - 1 {
            line_kept &= keep[rest % m];
            rest /= m;
        }
        debug_assert!(line < lines);
        if line_kept {
            for (c, &k) in chunk.iter_mut().zip(&keep) {
                if !k {
                    *c = zero;
                }
            }
        } else {
            chunk.fill(zero);
        }
    }
}

/// Transforms physical samples and applies the 2/3-rule truncation.
pub(crate) fn dealiased_from_physical(grid: Grid, values: &[f64]) -> Field {
    let mut out = Field::from_physical(grid, values).expect("lattice-sized buffer");
    dealias(&mut out);
    out
}

/// `μ |f|^{4/d} f` evaluated in physical space, then dealiased.
pub fn nonlinearity(f: &Field, mu: f64) -> Result<Field> {
    let values = f.to_physical()?;
    Ok(nonlinearity_of_samples(*f.grid(), &values, mu))
}

pub(crate) fn nonlinearity_of_samples(grid: Grid, values: &[f64], mu: f64) -> Field {
    let dim = grid.dim();
    let out: Vec<f64> = values.iter().map(|&u| mu * critical_power(u, dim)).collect();
    dealiased_from_physical(grid, &out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid;
    use std::f64::consts::PI;

    fn cos_mode(grid: Grid, n: [usize; 3]) -> Field {
        let mut f = Field::zeros(grid);
        let i = grid.flatten(n);
        f.coefficients_mut()[i] = Complex64::new(0.5, 0.0);
        f.coefficients_mut()[grid.negated_flat(i)] = Complex64::new(0.5, 0.0);
        f
    }

    #[test]
    fn constant_field_norms() {
        let g = Grid::new(2, 3.0, 8).unwrap();
        let f = Field::from_fn(g, |_| -1.5);
        for p in [1.0, 2.0, 3.5] {
            let expected = 1.5 * 3.0f64.powf(2.0 / p);
            assert!((lebesgue_norm(&f, p).unwrap() - expected).abs() < 1e-12 * expected);
        }
        assert!((lebesgue_norm(&f, f64::INFINITY).unwrap() - 1.5).abs() < 1e-14);
        assert!(lebesgue_norm(&f, 0.5).is_err());
    }

    #[test]
    fn cosine_l2_and_sobolev() {
        let g = Grid::new(2, 10.0, 16).unwrap();
        let f = cos_mode(g, [2, 0, 0]);
        let l2 = lebesgue_norm(&f, 2.0).unwrap();
        assert!((l2 - (100.0f64 / 2.0).sqrt()).abs() < 1e-12);
        let kappa = 2.0 * 2.0 * PI / 10.0;
        for s in [-0.7, 0.0, 1.3] {
            let expected = kappa.powf(s) * (100.0f64 / 2.0).sqrt();
            assert!((sobolev_norm(&f, s) - expected).abs() < 1e-12 * expected);
        }
    }

    #[test]
    fn fractional_laplacian_single_mode_and_inverse() {
        // |k0| = 2 with L = 2π and n = (2, 0).
        let g = Grid::new(2, 2.0 * PI, 16).unwrap();
        let f = cos_mode(g, [2, 0, 0]);
        let h = fractional_laplacian(&f, -1.0);
        let i = g.flatten([2, 0, 0]);
        assert!((h.coefficients()[i].re - 0.25).abs() < 1e-15);
        let back = fractional_laplacian(&h, 1.0);
        for (a, b) in back.coefficients().iter().zip(f.coefficients()) {
            assert!((a - b).norm() < 1e-14);
        }
        assert_eq!(fractional_laplacian(&f, 0.0), f);
    }

    #[test]
    fn nonlinearity_constant_and_zero() {
        let g = Grid::new(2, 1.0, 8).unwrap();
        let f = Field::from_fn(g, |_| -2.0);
        let n = nonlinearity(&f, -1.0).unwrap().to_physical().unwrap();
        assert!(n.iter().all(|v| (v - 8.0).abs() < 1e-12));
        let z = nonlinearity(&Field::zeros(g), 1.0).unwrap().to_physical().unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn critical_power_three_dimensional_branch() {
        assert_eq!(critical_power(0.0, 3), 0.0);
        let u: f64 = -1.7;
        let expected = -(1.7f64.powf(7.0 / 3.0));
        assert!((critical_power(u, 3) - expected).abs() < 1e-14 * expected.abs());
        assert_eq!(critical_power(-2.0, 2), -8.0);
    }

    #[test]
    fn norm_spec_validation() {
        assert!(NormSpec::Lebesgue(0.9).validate().is_err());
        assert!(NormSpec::SpaceTime(1.0).validate().is_err());
        let g = Grid::new(2, 1.0, 8).unwrap();
        assert!(NormSpec::SpaceTime(4.0).evaluate(&Field::zeros(g)).is_err());
        assert_eq!(NormSpec::HomogeneousSobolev(-0.2).evaluate(&Field::zeros(g)).unwrap(), 0.0);
    }
}
