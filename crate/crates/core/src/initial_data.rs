//! Admissible initial data: radial, supported in `|x| ≥ 1`, finite
//! `Ḣ^{-γ₀}` norm, and the split `h₀ = v₀ + w₀`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::littlewood_paley::{project, smooth_step, DyadicProjector, ProjectorMode};
use crate::spectral::{lebesgue_norm, sobolev_norm, Field, Grid};

/// Inner radius of the support annulus of the generated data.
pub const SUPPORT_RADIUS: f64 = 1.0;

/// Fraction of `‖h₀‖²_{L²}` allowed inside `|x| < 1` before the
/// decomposition reports a support warning.
pub const SUPPORT_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CutoffDirection {
    Leq,
    Geq,
}

/// Spatial cutoff `χ_{≤a}` (1 on `|x| ≤ a`, 0 on `|x| ≥ 1.1a`) or its
/// complement `χ_{≥a} = 1 - χ_{≤a}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffProfile {
    pub threshold: f64,
    pub direction: CutoffDirection,
}

impl CutoffProfile {
    pub fn new(threshold: f64, direction: CutoffDirection) -> Result<Self> {
        if !(threshold.is_finite() && threshold > 0.0) {
            return Err(Error::invalid("cutoff threshold", format!("a = {threshold}")));
        }
        Ok(CutoffProfile {
            threshold,
            direction,
        })
    }

    /// Radius beyond which `χ_{≤a}` vanishes.
    pub fn outer_radius(&self) -> f64 {
        1.1 * self.threshold
    }

    pub fn value(&self, radius: f64) -> f64 {
        let a = self.threshold;
        let inside = smooth_step((1.1 * a - radius) / (0.1 * a));
        match self.direction {
            CutoffDirection::Leq => inside,
            CutoffDirection::Geq => 1.0 - inside,
        }
    }

    /// Lattice samples of the cutoff; the transition must fit in the box.
    pub fn samples(&self, grid: &Grid) -> Result<Vec<f64>> {
        if self.outer_radius() >= 0.5 * grid.period() {
            return Err(Error::invalid(
                "cutoff threshold",
                format!(
                    "1.1·a = {} does not fit in a box of half-width {}",
                    self.outer_radius(),
                    0.5 * grid.period()
                ),
            ));
        }
        Ok(grid.radius().into_iter().map(|r| self.value(r)).collect())
    }
}

/// A cutoff realized on a lattice as a physical-space multiplier.
#[derive(Clone, Debug)]
pub struct Cutoff {
    pub profile: CutoffProfile,
    grid: Grid,
    values: Vec<f64>,
}

impl Cutoff {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn apply(&self, f: &Field) -> Result<Field> {
        if f.grid() != &self.grid {
            return Err(Error::GridMismatch("cutoff and field lattices differ".into()));
        }
        f.multiply_physical(&self.values)
    }
}

pub fn make_cutoff(threshold: f64, direction: CutoffDirection, grid: &Grid) -> Result<Cutoff> {
    let profile = CutoffProfile::new(threshold, direction)?;
    Ok(Cutoff {
        profile,
        grid: *grid,
        values: profile.samples(grid)?,
    })
}

/// Upper end of the admissible index range, `(d-1)/(d+2)`.
pub fn gamma0_bound(dim: usize) -> f64 {
    (dim as f64 - 1.0) / (dim as f64 + 2.0)
}

pub fn validate_gamma0(gamma0: f64, dim: usize) -> Result<()> {
    let bound = gamma0_bound(dim);
    if !(gamma0 >= 0.0 && gamma0 < bound) {
        return Err(Error::invalid(
            "gamma0",
            format!("γ₀ = {gamma0} outside [0, (d-1)/(d+2)) = [0, {bound:.4}) for d = {dim}"),
        ));
    }
    Ok(())
}

/// Parameters of the rough radial data generator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoughDataSpec {
    pub gamma0: f64,
    pub dim: usize,
    /// Target `‖h₀‖_{Ḣ^{-γ₀}}`.
    pub amplitude: f64,
    pub seed: u64,
    pub epsilon0: f64,
    /// Frequency band `[k_lo, k_hi]`; `None` selects the lowest lattice
    /// shell and two thirds of the Nyquist magnitude.
    pub band: Option<(f64, f64)>,
}

impl RoughDataSpec {
    pub fn new(gamma0: f64, dim: usize, amplitude: f64, seed: u64) -> Self {
        RoughDataSpec {
            gamma0,
            dim,
            amplitude,
            seed,
            epsilon0: 0.01,
            band: None,
        }
    }

    pub fn with_band(mut self, k_lo: f64, k_hi: f64) -> Self {
        self.band = Some((k_lo, k_hi));
        self
    }

    pub fn resolved_band(&self, grid: &Grid) -> (f64, f64) {
        self.band
            .unwrap_or((grid.dk(), 2.0 / 3.0 * grid.k_max()))
    }

    /// Spectral exponent of the generated coefficients, `γ₀ - d/2 - ε₀`.
    pub fn spectral_exponent(&self) -> f64 {
        self.gamma0 - self.dim as f64 / 2.0 - self.epsilon0
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if self.dim != grid.dim() {
            return Err(Error::invalid(
                "dimension",
                format!("spec d = {} on a d = {} grid", self.dim, grid.dim()),
            ));
        }
        validate_gamma0(self.gamma0, self.dim)?;
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return Err(Error::invalid("amplitude", format!("A = {}", self.amplitude)));
        }
        if !(self.epsilon0.is_finite() && self.epsilon0 > 0.0) {
            return Err(Error::invalid("epsilon0", format!("ε₀ = {}", self.epsilon0)));
        }
        let (lo, hi) = self.resolved_band(grid);
        if !(lo > 0.0 && lo <= hi && hi <= grid.k_max() * (1.0 + 1e-12)) {
            return Err(Error::invalid(
                "band",
                format!("[{lo}, {hi}] not inside (0, k_max = {}]", grid.k_max()),
            ));
        }
        Ok(())
    }
}

/// Number of doublings `j` with `k_lo·2^j ≤ k`, computed without logarithms
/// so shell membership is identical on every platform.
fn dyadic_shell(k: f64, k_lo: f64) -> usize {
    let mut j = 0;
    let mut edge = 2.0 * k_lo;
    while k >= edge {
        j += 1;
        edge *= 2.0;
    }
    j
}

/// Per-shell random signs drawn from a counter-based generator.
pub fn shell_signs(seed: u64, count: usize) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect()
}

/// Draws a rough radial field in `Ḣ^{-γ₀}`.
///
/// Coefficients are `ξ_j |k|^{γ₀ - d/2 - ε₀}` on the band, with one random
/// sign `ξ_j` per dyadic shell. The field is then multiplied by `χ_{≥1}`,
/// its mean is removed, and it is rescaled to `‖h₀‖_{Ḣ^{-γ₀}} = A`.
pub fn sample_rough_radial(spec: &RoughDataSpec, grid: &Grid) -> Result<Field> {
    spec.validate(grid)?;
    let (lo, hi) = spec.resolved_band(grid);
    let exponent = spec.spectral_exponent();
    let signs = shell_signs(spec.seed, 64);
    let raw = Field::from_symbol(*grid, |k| {
        let mag = k.iter().map(|v| v * v).sum::<f64>().sqrt();
        if mag > 0.0 && mag >= lo && mag <= hi {
            Complex64::new(signs[dyadic_shell(mag, lo).min(63)] * mag.powf(exponent), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    if raw.coefficients().iter().all(|c| c.re == 0.0) {
        return Err(Error::Degenerate(format!(
            "band [{lo}, {hi}] contains no lattice wavevector"
        )));
    }
    let cutoff = make_cutoff(SUPPORT_RADIUS, CutoffDirection::Geq, grid)?;
    let mut h0 = cutoff.apply(&raw)?;
    let removed = h0.remove_mean();
    log::debug!("rough data seed {}: removed mean {removed:.3e}", spec.seed);
    let norm = sobolev_norm(&h0, -spec.gamma0);
    if !(norm > 0.0) {
        return Err(Error::Degenerate("Ḣ^{-γ₀} norm vanishes after the cutoff".into()));
    }
    Ok(h0.scaled(spec.amplitude / norm))
}

/// Gaussian `A·exp(-|x|²/(2w²))` centred at the origin.
pub fn gaussian_bump(grid: Grid, amplitude: f64, width: f64) -> Field {
    Field::from_fn(grid, |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        amplitude * (-r2 / (2.0 * width * width)).exp()
    })
}

/// Smooth radial bump equal to `A` on `[r_in + w, r_out - w]` and vanishing
/// outside `[r_in, r_out]`, with transition width `w = (r_out - r_in)/4`.
pub fn annular_bump(grid: Grid, amplitude: f64, r_in: f64, r_out: f64) -> Field {
    let w = 0.25 * (r_out - r_in);
    Field::from_fn(grid, |x| {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        amplitude * smooth_step((r - r_in) / w) * smooth_step((r_out - r) / w)
    })
}

/// Real random field with independent Gaussian-like coefficients on
/// `0 < |k| ≤ k_hi`.
pub fn random_band_limited(grid: Grid, k_hi: f64, seed: u64) -> Field {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let draws: Vec<Complex64> = (0..grid.len())
        .map(|_| {
            // Sum of uniforms: cheap, symmetric, portable.
            let re: f64 = (0..4).map(|_| rng.random::<f64>() - 0.5).sum();
            let im: f64 = (0..4).map(|_| rng.random::<f64>() - 0.5).sum();
            Complex64::new(re, im)
        })
        .collect();
    let k2_max = k_hi * k_hi;
    let dk2 = grid.dk() * grid.dk();
    let coeffs = (0..grid.len())
        .map(|i| {
            let k2 = dk2 * grid.index_norm_sq(i) as f64;
            if k2 == 0.0 || k2 > k2_max || grid.index_max_abs(i) == grid.points() as i64 / 2 {
                Complex64::new(0.0, 0.0)
            } else {
                0.5 * (draws[i] + draws[grid.negated_flat(i)].conj())
            }
        })
        .collect();
    Field::from_coefficients(grid, coeffs).expect("lattice-sized buffer")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub scale: f64,
    pub w0_l2: f64,
    pub v0_sobolev: f64,
    pub h0_sobolev: f64,
    /// Fraction of `‖h₀‖²_{L²}` found in `|x| < 1`.
    pub support_leak: f64,
    pub support_warning: bool,
    /// Magnitude of the `k = 0` coefficient removed from `v₀`.
    pub mean_removed: f64,
}

#[derive(Clone, Debug)]
pub struct Decomposition {
    pub v0: Field,
    pub w0: Field,
    pub report: DecompositionReport,
}

/// Fraction of the squared L² mass of `f` inside `|x| < radius`, measured
/// after subtracting the field's average over that ball. Mean-zero fields on
/// the torus carry a constant offset there, which `Ḣ^{-γ₀}` does not see.
pub fn mass_fraction_inside(f: &Field, radius: f64) -> Result<f64> {
    let values = f.to_physical()?;
    let radii = f.grid().radius();
    let total: f64 = values.iter().map(|v| v * v).sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    let inner: Vec<f64> = values
        .iter()
        .zip(&radii)
        .filter(|(_, &r)| r < radius)
        .map(|(v, _)| *v)
        .collect();
    if inner.is_empty() {
        return Ok(0.0);
    }
    let offset = inner.iter().sum::<f64>() / inner.len() as f64;
    let inside: f64 = inner.iter().map(|v| (v - offset) * (v - offset)).sum();
    Ok(inside / total)
}

/// `v₀ = χ_{≥1/2}(P_{≥N} h₀)` (mean re-zeroed) and `w₀ = h₀ - v₀`.
pub fn decompose(h0: &Field, scale: f64, gamma0: f64) -> Result<Decomposition> {
    let grid = *h0.grid();
    let support_leak = mass_fraction_inside(h0, SUPPORT_RADIUS)?;
    let support_warning = support_leak > SUPPORT_TOLERANCE;
    if support_warning {
        log::warn!("h0 has {support_leak:.2e} of its mass inside |x| < 1");
    }
    let high = project(h0, &DyadicProjector::new(scale, ProjectorMode::Geq)?)?;
    let mut v0 = make_cutoff(0.5, CutoffDirection::Geq, &grid)?.apply(&high)?;
    let mean_removed = v0.remove_mean();
    let w0 = h0.sub(&v0)?;
    let report = DecompositionReport {
        scale,
        w0_l2: lebesgue_norm(&w0, 2.0)?,
        v0_sobolev: sobolev_norm(&v0, -gamma0),
        h0_sobolev: sobolev_norm(h0, -gamma0),
        support_leak,
        support_warning,
        mean_removed,
    };
    Ok(Decomposition { v0, w0, report })
}

/// `‖χ_{≤1/2}(P_{≥N} h₀)‖_{L²}`.
pub fn mismatch_leak(h0: &Field, scale: f64) -> Result<f64> {
    let grid = *h0.grid();
    let high = project(h0, &DyadicProjector::new(scale, ProjectorMode::Geq)?)?;
    let near = make_cutoff(0.5, CutoffDirection::Leq, &grid)?.apply(&high)?;
    lebesgue_norm(&near, 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::lp_norm_of_samples;

    fn grid() -> Grid {
        Grid::new(2, 16.0, 128).unwrap()
    }

    #[test]
    fn cutoff_values() {
        let c = CutoffProfile::new(0.5, CutoffDirection::Leq).unwrap();
        assert_eq!(c.value(0.3), 1.0);
        assert_eq!(c.value(0.6), 0.0);
        let g = CutoffProfile::new(0.5, CutoffDirection::Geq).unwrap();
        for r in [0.0, 0.5, 0.51, 0.525, 0.54, 0.55, 1.0] {
            assert!((c.value(r) + g.value(r) - 1.0).abs() < 1e-15);
        }
        assert!(make_cutoff(8.0, CutoffDirection::Leq, &grid()).is_err());
    }

    #[test]
    fn gamma0_range() {
        assert!(validate_gamma0(0.0, 2).is_ok());
        assert!(validate_gamma0(0.2, 2).is_ok());
        assert!(validate_gamma0(0.25, 2).is_err());
        assert!(validate_gamma0(0.3, 2).is_err());
        assert!(validate_gamma0(0.39, 3).is_ok());
        assert!(validate_gamma0(-0.01, 3).is_err());
    }

    #[test]
    fn rough_data_is_normalized_real_mean_zero_and_supported() {
        let g = grid();
        let spec = RoughDataSpec::new(0.2, 2, 3.0, 42);
        let h = sample_rough_radial(&spec, &g).unwrap();
        assert!((sobolev_norm(&h, -0.2) - 3.0).abs() < 1e-12);
        assert_eq!(h.mean(), 0.0);
        assert!(h.symmetry_defect() < 1e-12);
        // Inside the unit ball only the constant left by mean removal remains.
        let values = h.to_physical().unwrap();
        let origin = values[0];
        for (v, r) in values.iter().zip(g.radius()) {
            if r <= 1.0 {
                assert!((v - origin).abs() < 1e-12, "r={r} v={v}");
            }
        }
        assert!(mass_fraction_inside(&h, 1.0).unwrap() < 1e-20);
    }

    #[test]
    fn rough_data_is_deterministic_and_seed_dependent() {
        let g = grid();
        let a = sample_rough_radial(&RoughDataSpec::new(0.1, 2, 1.0, 9), &g).unwrap();
        let b = sample_rough_radial(&RoughDataSpec::new(0.1, 2, 1.0, 9), &g).unwrap();
        let c = sample_rough_radial(&RoughDataSpec::new(0.1, 2, 1.0, 10), &g).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn rough_data_errors() {
        let g = grid();
        let bad_band = RoughDataSpec::new(0.1, 2, 1.0, 1).with_band(0.1, 0.2);
        assert!(matches!(sample_rough_radial(&bad_band, &g), Err(Error::Degenerate(_))));
        assert!(sample_rough_radial(&RoughDataSpec::new(0.3, 2, 1.0, 1), &g).is_err());
        assert!(sample_rough_radial(&RoughDataSpec::new(0.1, 3, 1.0, 1), &g).is_err());
    }

    #[test]
    fn single_shell_quasi_mode_is_normalized() {
        let g = grid();
        let k = 4.0 * g.dk();
        let spec = RoughDataSpec::new(0.2, 2, 0.7, 3).with_band(k, k);
        let h = sample_rough_radial(&spec, &g).unwrap();
        assert!((sobolev_norm(&h, -0.2) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn rough_data_is_invariant_under_axis_swap() {
        let g = grid();
        let h = sample_rough_radial(&RoughDataSpec::new(0.2, 2, 1.0, 5), &g).unwrap();
        let c = h.coefficients();
        let m = g.points();
        for i in 0..m {
            for j in 0..m {
                let a = c[g.flatten([i, j, 0])];
                let b = c[g.flatten([j, i, 0])];
                assert!((a - b).norm() < 1e-12 * (1.0 + a.norm()));
            }
        }
    }

    #[test]
    fn shells_are_dyadic() {
        assert_eq!(dyadic_shell(1.0, 1.0), 0);
        assert_eq!(dyadic_shell(1.99, 1.0), 0);
        assert_eq!(dyadic_shell(2.0, 1.0), 1);
        assert_eq!(dyadic_shell(9.0, 1.0), 3);
    }

    #[test]
    fn decomposition_reconstructs_exactly() {
        let g = grid();
        let h = sample_rough_radial(&RoughDataSpec::new(0.2, 2, 1.0, 1), &g).unwrap();
        for n in [0.25, 2.0, 8.0] {
            let d = decompose(&h, n, 0.2).unwrap();
            let sum = d.v0.add(&d.w0).unwrap();
            for (a, b) in sum.coefficients().iter().zip(h.coefficients()) {
                assert!((a - b).norm() <= 1e-15 * (1.0 + b.norm()));
            }
            assert!(!d.report.support_warning);
        }
    }

    #[test]
    fn decomposition_extremes() {
        let g = grid();
        let h = sample_rough_radial(&RoughDataSpec::new(0.2, 2, 1.0, 2), &g).unwrap();
        // Below the lowest shell: P_{≥N} = I on the content, χ_{≥1/2} = 1 on the support.
        let d = decompose(&h, 0.5 * g.dk(), 0.2).unwrap();
        // What remains is the mean offset times χ_{≤1/2}.
        assert!(d.report.w0_l2 < 1e-2 * lebesgue_norm(&h, 2.0).unwrap());
        let offset = h.to_physical().unwrap()[0];
        let ball = make_cutoff(0.5, CutoffDirection::Leq, &g).unwrap();
        let bound = offset.abs() * lp_norm_of_samples(ball.values(), g.cell_volume(), 2.0).unwrap();
        assert!(d.report.w0_l2 <= 1.01 * bound + 1e-12, "{} vs {bound}", d.report.w0_l2);
        // At N = 2·k_max only lattice corners beyond k_max survive P_{≥N}.
        let d = decompose(&h, 2.0 * g.k_max(), 0.2).unwrap();
        let rel = lebesgue_norm(&d.v0, 2.0).unwrap() / lebesgue_norm(&h, 2.0).unwrap();
        eprintln!("corner residue {rel:e}");
        assert!(rel < 1e-3);
        // A band-limited field is annihilated exactly.
        let smooth = random_band_limited(g, 0.5 * g.k_max(), 1);
        let high = project(&smooth, &DyadicProjector::new(g.k_max(), ProjectorMode::Geq).unwrap()).unwrap();
        assert!(high.coefficients().iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn mismatch_leak_is_homogeneous() {
        let g = grid();
        let h = sample_rough_radial(&RoughDataSpec::new(0.2, 2, 1.0, 3), &g).unwrap();
        assert_eq!(mismatch_leak(&Field::zeros(g), 4.0).unwrap(), 0.0);
        let a = mismatch_leak(&h, 4.0).unwrap();
        let b = mismatch_leak(&h.scaled(5.0), 4.0).unwrap();
        assert!((b - 5.0 * a).abs() < 1e-12 * b);
    }

    #[test]
    fn support_violation_is_reported_not_fatal() {
        let g = grid();
        let bump = gaussian_bump(g, 1.0, 0.5);
        let d = decompose(&bump, 2.0, 0.1).unwrap();
        assert!(d.report.support_warning);
    }
}
