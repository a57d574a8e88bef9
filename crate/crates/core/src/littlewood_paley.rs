//! Smooth dyadic frequency projectors and Bernstein/mismatch instrumentation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::initial_data::{CutoffDirection, CutoffProfile};
use crate::spectral::{fractional_laplacian, lebesgue_norm, Field};

fn blend_kernel(r: f64) -> f64 {
    if r > 0.0 {
        (-1.0 / r).exp()
    } else {
        0.0
    }
}

/// Smooth monotone step: 0 for `r ≤ 0`, 1 for `r ≥ 1`.
pub fn smooth_step(r: f64) -> f64 {
    let a = blend_kernel(r);
    let b = blend_kernel(1.0 - r);
    if a == 0.0 {
        0.0
    } else {
        a / (a + b)
    }
}

/// Radial frequency bump `φ(ξ) = θ(2 - |ξ|)`: 1 on `|ξ| ≤ 1`, 0 on `|ξ| ≥ 2`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BumpProfile;

impl BumpProfile {
    pub fn value(&self, radius: f64) -> f64 {
        smooth_step(2.0 - radius)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProjectorMode {
    /// `P_{≤N}`, symbol `φ(ξ/N)`.
    Leq,
    /// `P_N`, symbol `φ(ξ/N) - φ(2ξ/N)`.
    Band,
    /// `P_{>N} = I - P_{≤N}`.
    Gt,
    /// `P_{<N} = P_{≤N/2}`.
    Lt,
    /// `P_{≥N} = I - P_{<N}`.
    Geq,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicProjector {
    pub scale: f64,
    pub mode: ProjectorMode,
}

impl DyadicProjector {
    pub fn new(scale: f64, mode: ProjectorMode) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::invalid("projector scale", format!("N = {scale}")));
        }
        Ok(DyadicProjector { scale, mode })
    }

    /// Projector at `N = 2^j`.
    pub fn dyadic(j: i32, mode: ProjectorMode) -> Self {
        DyadicProjector {
            scale: 2f64.powi(j),
            mode,
        }
    }

    /// Symbol of the "≤" part, before any complement is taken.
    fn low_symbol(&self, k: f64) -> f64 {
        let phi = BumpProfile;
        match self.mode {
            ProjectorMode::Leq | ProjectorMode::Gt => phi.value(k / self.scale),
            ProjectorMode::Lt | ProjectorMode::Geq => phi.value(2.0 * k / self.scale),
            ProjectorMode::Band => phi.value(k / self.scale) - phi.value(2.0 * k / self.scale),
        }
    }

    /// Multiplier value at frequency magnitude `k`.
    pub fn symbol(&self, k: f64) -> f64 {
        match self.mode {
            ProjectorMode::Gt | ProjectorMode::Geq => 1.0 - self.low_symbol(k),
            _ => self.low_symbol(k),
        }
    }
}

/// Applies a projector coefficient-wise. Complementary projectors are formed
/// by subtraction so that `P_{≤N} f + P_{>N} f` reproduces `f`.
pub fn project(f: &Field, proj: &DyadicProjector) -> Result<Field> {
    let limit = 2.0 * f.grid().k_max();
    if proj.scale > limit * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!(
            "projector scale {} exceeds 2·k_max = {limit}",
            proj.scale
        )));
    }
    Ok(project_unchecked(f, proj))
}

pub(crate) fn project_unchecked(f: &Field, proj: &DyadicProjector) -> Field {
    let low = f.apply_multiplier(|k2| proj.low_symbol(k2.sqrt()));
    match proj.mode {
        ProjectorMode::Gt | ProjectorMode::Geq => f.sub(&low).expect("same grid"),
        _ => low,
    }
}

/// `‖P_N f‖_{L^q} / (N^{d/p - d/q} ‖P_N f‖_{L^p})`; zero when `P_N f = 0`.
pub fn bernstein_ratio(f: &Field, scale: f64, p: f64, q: f64) -> Result<f64> {
    if !(q >= p) {
        return Err(Error::invalid("Bernstein exponents", format!("q = {q} < p = {p}")));
    }
    let band = project(f, &DyadicProjector::new(scale, ProjectorMode::Band)?)?;
    let denom = lebesgue_norm(&band, p)?;
    if denom == 0.0 {
        return Ok(0.0);
    }
    let d = f.grid().dim() as f64;
    Ok(lebesgue_norm(&band, q)? / (scale.powf(d / p - d / q) * denom))
}

/// `‖|∇|^s P_N f‖_{L²} / (N^s ‖P_N f‖_{L²})`, which lies in `[2^{-|s|}, 2^{|s|}]`.
pub fn bernstein_derivative_ratio(f: &Field, scale: f64, s: f64) -> Result<f64> {
    let band = project(f, &DyadicProjector::new(scale, ProjectorMode::Band)?)?;
    let denom = lebesgue_norm(&band, 2.0)?;
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok(lebesgue_norm(&fractional_laplacian(&band, s), 2.0)? / (scale.powf(s) * denom))
}

/// Separation between the supports of two cutoffs (inner ball, outer exterior).
pub fn support_separation(a: &CutoffProfile, b: &CutoffProfile) -> Result<f64> {
    let (ball, exterior) = match (a.direction, b.direction) {
        (CutoffDirection::Leq, CutoffDirection::Geq) => (a, b),
        (CutoffDirection::Geq, CutoffDirection::Leq) => (b, a),
        _ => {
            return Err(Error::Precondition(
                "cutoffs of the same direction always overlap".into(),
            ))
        }
    };
    let gap = exterior.threshold - ball.outer_radius();
    if gap <= 0.0 {
        return Err(Error::Precondition(format!(
            "cutoff supports overlap (gap {gap:.3})"
        )));
    }
    Ok(gap)
}

/// Quotient of `‖φ₁ P_{≤N}(φ₂ f)‖_{L^q}` by `A^{-m+d/q-d/p} N^{-m} ‖φ₂ f‖_{L^p}`.
#[allow(clippy::too_many_arguments)]
pub fn mismatch_ratio(
    f: &Field,
    inner: &CutoffProfile,
    outer: &CutoffProfile,
    scale: f64,
    p: f64,
    q: f64,
    m: f64,
) -> Result<f64> {
    let gap = support_separation(inner, outer)?;
    let grid = *f.grid();
    let localized = f.multiply_physical(&outer.samples(&grid)?)?;
    let rhs_norm = lebesgue_norm(&localized, p)?;
    if rhs_norm == 0.0 {
        return Ok(0.0);
    }
    let low = project(&localized, &DyadicProjector::new(scale, ProjectorMode::Leq)?)?;
    let lhs = lebesgue_norm(&low.multiply_physical(&inner.samples(&grid)?)?, q)?;
    let d = grid.dim() as f64;
    let rhs = gap.powf(-m + d / q - d / p) * scale.powf(-m) * rhs_norm;
    Ok(lhs / rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initial_data::random_band_limited;
    use crate::spectral::Grid;
    use num_complex::Complex64;

    #[test]
    fn bump_plateau_support_and_monotonicity() {
        let phi = BumpProfile;
        assert_eq!(phi.value(0.0), 1.0);
        assert_eq!(phi.value(1.0), 1.0);
        assert_eq!(phi.value(2.0), 0.0);
        assert_eq!(phi.value(3.0), 0.0);
        let mut prev = 1.0;
        for i in 0..=400 {
            let v = phi.value(1.0 + i as f64 / 400.0);
            assert!((0.0..=1.0).contains(&v));
            assert!(v <= prev);
            prev = v;
        }
        assert!((phi.value(1.5) - 0.5).abs() < 1e-15);
    }

    fn grid() -> Grid {
        Grid::new(2, 16.0, 128).unwrap()
    }

    #[test]
    fn low_and_high_content() {
        let g = grid();
        let leq = DyadicProjector::new(2.0, ProjectorMode::Leq).unwrap();
        let low = random_band_limited(g, 2.0, 3);
        assert_eq!(project(&low, &leq).unwrap(), low);
        let high = random_band_limited(g, 20.0, 4).apply_multiplier(|k2| if k2 >= 16.0 { 1.0 } else { 0.0 });
        let p = project(&high, &leq).unwrap();
        assert!(p.coefficients().iter().all(|c| *c == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn complementarity_and_telescoping() {
        let g = grid();
        let f = random_band_limited(g, 20.0, 7);
        let lo = project(&f, &DyadicProjector::new(4.0, ProjectorMode::Leq).unwrap()).unwrap();
        let hi = project(&f, &DyadicProjector::new(4.0, ProjectorMode::Gt).unwrap()).unwrap();
        let sum = lo.add(&hi).unwrap();
        for (a, b) in sum.coefficients().iter().zip(f.coefficients()) {
            assert!((a - b).norm() <= 1e-14 * b.norm().max(1e-300));
        }
        // Σ_{M=1/2..4} P_M = P_{≤4} - P_{≤1/4}.
        let mut acc = Field::zeros(g);
        for j in -1..=2 {
            acc = acc.add(&project(&f, &DyadicProjector::dyadic(j, ProjectorMode::Band)).unwrap()).unwrap();
        }
        let expected = lo
            .sub(&project(&f, &DyadicProjector::new(0.25, ProjectorMode::Leq).unwrap()).unwrap())
            .unwrap();
        for (a, b) in acc.coefficients().iter().zip(expected.coefficients()) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn non_adjacent_bands_are_orthogonal() {
        let g = grid();
        let f = random_band_limited(g, 20.0, 11);
        let a = project(&f, &DyadicProjector::dyadic(0, ProjectorMode::Band)).unwrap();
        let b = project(&f, &DyadicProjector::dyadic(2, ProjectorMode::Band)).unwrap();
        let inner: f64 = a
            .coefficients()
            .iter()
            .zip(b.coefficients())
            .map(|(x, y)| (x * y.conj()).re)
            .sum();
        assert_eq!(inner, 0.0);
    }

    #[test]
    fn projection_preserves_reality() {
        let g = grid();
        let f = random_band_limited(g, 20.0, 5);
        for mode in [ProjectorMode::Leq, ProjectorMode::Band, ProjectorMode::Gt, ProjectorMode::Geq] {
            let p = project(&f, &DyadicProjector::new(2.0, mode).unwrap()).unwrap();
            assert!(p.symmetry_defect() < 1e-14);
        }
    }

    #[test]
    fn scale_beyond_lattice_is_rejected() {
        let g = grid();
        let f = Field::zeros(g);
        let too_big = 2.0 * g.k_max() * 1.01;
        assert!(project(&f, &DyadicProjector::new(too_big, ProjectorMode::Leq).unwrap()).is_err());
        assert!(DyadicProjector::new(0.0, ProjectorMode::Leq).is_err());
    }

    #[test]
    fn single_mode_bernstein_ratio_is_one() {
        let g = grid();
        // |k0| = 2π·3/16 ≈ 1.178 ∈ (1, 2] for N = 2.
        let i = g.flatten([3, 0, 0]);
        let mut f = Field::zeros(g);
        f.coefficients_mut()[i] = Complex64::new(0.5, 0.0);
        f.coefficients_mut()[g.negated_flat(i)] = Complex64::new(0.5, 0.0);
        let r = bernstein_ratio(&f, 2.0, 2.0, 2.0).unwrap();
        assert!((r - 1.0).abs() < 1e-14);
        assert_eq!(bernstein_ratio(&Field::zeros(g), 2.0, 2.0, 8.0).unwrap(), 0.0);
        assert!(bernstein_ratio(&f, 2.0, 4.0, 2.0).is_err());
    }

    #[test]
    fn derivative_ratio_inside_band_bounds() {
        let g = grid();
        for seed in 0..4 {
            let f = random_band_limited(g, 20.0, seed);
            for s in [-1.5, -0.5, 0.5, 2.0] {
                for j in 0..4 {
                    let r = bernstein_derivative_ratio(&f, 2f64.powi(j), s).unwrap();
                    let b = 2f64.powf(s.abs());
                    assert!(r >= 1.0 / b && r <= b, "s={s} j={j} r={r}");
                }
            }
        }
    }

    #[test]
    fn mismatch_requires_separated_supports() {
        let g = grid();
        let f = random_band_limited(g, 10.0, 1);
        let inner = CutoffProfile::new(0.5, CutoffDirection::Leq).unwrap();
        let outer = CutoffProfile::new(0.5, CutoffDirection::Geq).unwrap();
        assert!(mismatch_ratio(&f, &inner, &outer, 4.0, 2.0, 2.0, 1.0).is_err());
        let outer = CutoffProfile::new(0.9, CutoffDirection::Geq).unwrap();
        assert!(mismatch_ratio(&f, &inner, &outer, 4.0, 2.0, 2.0, 1.0).unwrap().is_finite());
        assert_eq!(
            mismatch_ratio(&Field::zeros(g), &inner, &outer, 4.0, 2.0, 2.0, 1.0).unwrap(),
            0.0
        );
    }
}
