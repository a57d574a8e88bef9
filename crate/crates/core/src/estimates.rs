//! Space-time norms, inequality ratios, decay regression and the
//! low-frequency bootstrap diagnostic.
//!
//! Every `≲` is checked as a measured quotient: the harness asserts the
//! quotient is finite and stable under sweeps, never a particular constant.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heat_flow::{critical_exponent, linear_propagate, phi_pair, CutoffSchedule, Trajectory};
use crate::spectral::{fractional_laplacian, lebesgue_norm, lp_norm_of_samples, sobolev_norm, Field};

/// Composite trapezoid rule on an arbitrary sorted grid.
pub fn trapezoid(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeNorm {
    pub q: f64,
    pub window: (f64, f64),
    pub value: f64,
}

/// `(∫ ‖h(t)‖_{L^q}^q dt)^{1/q}` over the window by the trapezoid rule.
///
/// The critical exponent `2 + 4/d` is read from the records; any other `q`
/// needs snapshots.
pub fn spacetime_norm(traj: &Trajectory, q: f64, window: (f64, f64)) -> Result<SpaceTimeNorm> {
    if !(q >= 1.0) || q.is_infinite() {
        return Err(Error::invalid("q", format!("{q} is not a finite exponent ≥ 1")));
    }
    let inside = |t: f64| t >= window.0 && t <= window.1;
    let points: Vec<(f64, f64)> = if (q - critical_exponent(traj.grid.dim())).abs() < 1e-12 {
        traj.records_in(window).map(|r| (r.t, r.lq.powf(q))).collect()
    } else {
        traj.snapshots
            .iter()
            .filter(|s| inside(s.t))
            .map(|s| Ok((s.t, lebesgue_norm(&s.field, q)?.powf(q))))
            .collect::<Result<_>>()?
    };
    if points.len() < 3 {
        return Err(Error::Precondition(format!(
            "{} samples in [{}, {}], need at least 3",
            points.len(),
            window.0,
            window.1
        )));
    }
    Ok(SpaceTimeNorm {
        q,
        window,
        value: trapezoid(&points).powf(1.0 / q),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedSupNorm {
    pub beta: f64,
    pub window: (f64, f64),
    pub value: f64,
}

/// `max t^{β/2} ‖h(t)‖_{L²}` over records with `t > 0` in the window.
pub fn weighted_sup_norm(traj: &Trajectory, beta: f64, window: (f64, f64)) -> WeightedSupNorm {
    let value = traj
        .records_in(window)
        .filter(|r| r.t > 0.0)
        .map(|r| r.t.powf(0.5 * beta) * r.l2)
        .fold(0.0, f64::max);
    WeightedSupNorm { beta, window, value }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
}

impl FitResult {
    pub fn predict(&self, t: f64) -> f64 {
        (self.intercept + self.slope * t.ln()).exp()
    }
}

/// Least squares of `log v` against `log t` over points in the window.
pub fn fit_power_law(points: &[(f64, f64)], window: (f64, f64)) -> Result<FitResult> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &(t, v) in points.iter().filter(|p| p.0 >= window.0 && p.0 <= window.1) {
        if !(t > 0.0 && v > 0.0) || !v.is_finite() {
            return Err(Error::invalid("fit data", format!("non-positive value {v} at t = {t}")));
        }
        xs.push(t.ln());
        ys.push(v.ln());
    }
    if xs.len() < 2 {
        return Err(Error::Precondition("a fit needs at least two points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all fit abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    let r_squared = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    Ok(FitResult {
        slope,
        intercept,
        r_squared,
        window,
    })
}

pub const MIN_FIT_RECORDS: usize = 8;

/// Log-log fit of `‖h(t)‖_{L²}` over the window.
pub fn decay_fit(traj: &Trajectory, window: (f64, f64)) -> Result<FitResult> {
    let points: Vec<(f64, f64)> = traj.records_in(window).map(|r| (r.t, r.l2)).collect();
    if points.len() < MIN_FIT_RECORDS {
        return Err(Error::Precondition(format!(
            "{} records in the fit window, need {MIN_FIT_RECORDS}",
            points.len()
        )));
    }
    fit_power_law(&points, window)
}

/// `(Σ_k e^{-2t|k|²} |ĥ₀(k)|² L^d)^{1/2}`: the L² norm of the linear flow
/// evaluated directly from the initial coefficients.
pub fn linear_l2_oracle(h0: &Field, t: f64) -> f64 {
    let grid = h0.grid();
    let k2 = grid.wavenumber_sq();
    let sum: f64 = h0
        .coefficients()
        .iter()
        .zip(&k2)
        .map(|(c, k2)| (-2.0 * t * k2).exp() * c.norm_sqr())
        .sum();
    (sum * grid.volume()).sqrt()
}

/// Time integral of `‖e^{tΔ}f‖_{L^q}^q` on `[0, ∞)`, truncated at a horizon
/// and completed by a power-law tail.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearSpaceTime {
    pub q: f64,
    /// `∫₀^T`.
    pub integral: f64,
    /// Extrapolated `∫_T^∞` from the slope fitted on `[T/10, T]`.
    pub tail: f64,
    pub horizon: f64,
    pub tail_fraction: f64,
}

impl LinearSpaceTime {
    pub fn norm(&self) -> f64 {
        (self.integral + self.tail).powf(1.0 / self.q)
    }
}

pub const TAIL_TOLERANCE: f64 = 0.01;
const SAMPLES_PER_DECADE: usize = 16;
const MAX_DOUBLINGS: usize = 40;

/// `‖e^{tΔ}f‖_{L^q_{tx}}` on `[0, ∞)`. The horizon doubles from `horizon`
/// until the extrapolated tail is below 1% of the total.
pub fn linear_spacetime(f: &Field, q: f64, horizon: f64) -> Result<LinearSpaceTime> {
    if !(horizon > 0.0) {
        return Err(Error::invalid("horizon", format!("{horizon} is not positive")));
    }
    let grid = *f.grid();
    let cell = grid.cell_volume();
    let k2 = grid.wavenumber_sq();
    let base = f.coefficients();
    let sample = |t: f64| -> f64 {
        let coeffs: Vec<Complex64> = base
            .iter()
            .zip(&k2)
            .map(|(c, k2)| c * (-t * k2).exp())
            .collect();
        let values = Field::from_coefficients(grid, coeffs)
            .expect("same grid")
            .physical_unchecked();
        lp_norm_of_samples(&values, cell, q).expect("q ≥ 1").powf(q)
    };
    // Below t₀ the flow has not yet smoothed the top of the spectrum.
    let t0 = 1e-2 / (grid.k_max() * grid.k_max());
    let ratio = 10f64.powf(1.0 / SAMPLES_PER_DECADE as f64);
    let mut points = vec![(0.0, sample(0.0))];
    let mut t = t0.min(horizon);
    let mut target = horizon;
    for _ in 0..=MAX_DOUBLINGS {
        while t < target {
            points.push((t, sample(t)));
            t = (t * ratio).min(target);
        }
        points.push((target, sample(target)));
        t = target * ratio;
        let integral = trapezoid(&points);
        let last = points.last().unwrap().1;
        let tail = if last == 0.0 {
            0.0
        } else {
            let decade: Vec<(f64, f64)> = points
                .iter()
                .copied()
                .filter(|p| p.0 >= target / 10.0 && p.1 > 0.0)
                .collect();
            let slope = fit_power_law(&decade, (target / 10.0, target))
                .map(|fit| fit.slope)
                .unwrap_or(0.0);
            if slope < -1.0 {
                last * target / (-slope - 1.0)
            } else {
                f64::INFINITY
            }
        };
        let total = integral + tail;
        let tail_fraction = if total > 0.0 { tail / total } else { 0.0 };
        if tail_fraction < TAIL_TOLERANCE {
            return Ok(LinearSpaceTime {
                q,
                integral,
                tail,
                horizon: target,
                tail_fraction,
            });
        }
        target *= 2.0;
    }
    Err(Error::Precondition(format!(
        "tail still above {TAIL_TOLERANCE} at horizon {target}"
    )))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrichartzRatio {
    pub ratio: f64,
    pub numerator: LinearSpaceTime,
    pub denominator: f64,
}

/// `‖e^{tΔ}h₀‖_{L^{2+4/d}_{tx}} / ‖h₀‖_{Ḣ^{-γ₀}}`.
pub fn strichartz_ratio(h0: &Field, gamma0: f64, horizon: f64) -> Result<StrichartzRatio> {
    let denominator = sobolev_norm(h0, -gamma0);
    if denominator == 0.0 {
        return Err(Error::Degenerate("‖h₀‖_{Ḣ^{-γ₀}} vanishes".into()));
    }
    let numerator = linear_spacetime(h0, critical_exponent(h0.grid().dim()), horizon)?;
    Ok(StrichartzRatio {
        ratio: numerator.norm() / denominator,
        numerator,
        denominator,
    })
}

/// `‖e^{tΔ}f‖_{L^q_{tx}} / ‖|∇|^δ f‖_{L²}` for `q > 2` and
/// `δ ∈ (1/2 - 3/q, 1 - 4/q)`.
pub fn supercritical_ratio(f: &Field, q: f64, delta: f64, horizon: f64) -> Result<f64> {
    if !(q > 2.0) {
        return Err(Error::Precondition(format!("q = {q} must exceed 2")));
    }
    let (lo, hi) = (0.5 - 3.0 / q, 1.0 - 4.0 / q);
    if !(delta > lo && delta < hi) {
        return Err(Error::Precondition(format!(
            "δ = {delta} outside ({lo}, {hi}) for q = {q}"
        )));
    }
    let denominator = sobolev_norm(f, delta);
    if denominator == 0.0 {
        return Err(Error::Degenerate("‖|∇|^δ f‖_{L²} vanishes".into()));
    }
    Ok(linear_spacetime(f, q, horizon)?.norm() / denominator)
}

/// `‖|x|^α f‖_{L^q} / ‖|∇|^s f‖_{L^p}`, requiring `α + s = d(1/p - 1/q)`.
pub fn radial_embedding_ratio(f: &Field, alpha: f64, q: f64, p: f64, s: f64) -> Result<f64> {
    let d = f.grid().dim() as f64;
    let gap = alpha + s - d * (1.0 / p - 1.0 / q);
    if gap.abs() > 1e-12 {
        return Err(Error::Precondition(format!(
            "α + s - d(1/p - 1/q) = {gap:e}, must vanish"
        )));
    }
    if !(s > 0.0 && s < d) {
        return Err(Error::Precondition(format!("s = {s} outside (0, d)")));
    }
    let grid = *f.grid();
    let values = f.to_physical()?;
    let radii = grid.radius();
    // The origin is a lattice point; give it the radius of half a cell.
    let r_min = 0.5 * grid.spacing();
    let weighted: Vec<f64> = values
        .iter()
        .zip(&radii)
        .map(|(v, &r)| v * r.max(r_min).powf(alpha))
        .collect();
    let numerator = lp_norm_of_samples(&weighted, grid.cell_volume(), q)?;
    let denominator = lebesgue_norm(&fractional_laplacian(f, s), p)?;
    if denominator == 0.0 {
        return Err(Error::Degenerate("‖|∇|^s f‖_{L^p} vanishes".into()));
    }
    Ok(numerator / denominator)
}

/// `‖e^{tΔ}f‖_{L^q} / (t^{-(d/2)(1/p - 1/q)} ‖f‖_{L^p})`.
pub fn heat_smoothing_ratio(f: &Field, t: f64, p: f64, q: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::invalid("time", format!("{t} is not positive")));
    }
    let d = f.grid().dim() as f64;
    let denominator = t.powf(-0.5 * d * (1.0 / p - 1.0 / q)) * lebesgue_norm(f, p)?;
    if denominator == 0.0 {
        return Err(Error::Degenerate("‖f‖_{L^p} vanishes".into()));
    }
    Ok(lebesgue_norm(&linear_propagate(f, t)?, q)? / denominator)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum LowFreqVariant {
    /// Weight `t^{-α/2}`, bracket `1 + N t^{α/2} + N t^{1/2} Y_α`, schedule
    /// `N² = 2α/t`.
    Weak,
    /// Weight `t^{-γ₀/2}`, bracket `1 + N t^{γ₀/2} + N t^{(1-α)/2} Y_{γ₀}`,
    /// schedule `N² = 2γ₀/t`.
    Improved { gamma0: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowFreqReport {
    pub variant: LowFreqVariant,
    pub alpha: f64,
    pub c_budget: f64,
    /// `Y_β` measured from the trajectory.
    pub y_norm: f64,
    pub quotients: Vec<(f64, f64)>,
    pub max_quotient: f64,
    /// Smallest budget for which every quotient is at most 1.
    pub required_budget: f64,
}

impl LowFreqReport {
    pub fn closes(&self) -> bool {
        self.max_quotient <= 1.0
    }
}

/// Quotient of `‖P_{≤N(t)}h(t)‖_{L²}` by the bound's right side with `C`
/// replaced by `c_budget`, over records with `t ≥ 1`.
pub fn lowfreq_diagnostic(
    traj: &Trajectory,
    alpha: f64,
    c_budget: f64,
    variant: LowFreqVariant,
) -> Result<LowFreqReport> {
    if !(c_budget > 0.0) {
        return Err(Error::invalid("c_budget", format!("{c_budget} is not positive")));
    }
    let beta = match variant {
        LowFreqVariant::Weak => alpha,
        LowFreqVariant::Improved { gamma0 } => {
            if alpha > gamma0 + 1e-15 {
                return Err(Error::invalid("alpha", format!("{alpha} exceeds γ₀ = {gamma0}")));
            }
            gamma0
        }
    };
    let expected = CutoffSchedule::Sqrt { alpha: beta };
    if traj.schedule != expected {
        return Err(Error::Precondition(format!(
            "trajectory recorded with {:?}, diagnostic needs {expected:?}",
            traj.schedule
        )));
    }
    let y_norm = weighted_sup_norm(traj, beta, (0.0, f64::INFINITY)).value;
    let mut quotients = Vec::new();
    let mut required = 0.0f64;
    for r in traj.records.iter().filter(|r| r.t >= 1.0) {
        let (Some(low), Some(n)) = (r.lowfreq_l2, r.n_of_t) else {
            return Err(Error::Precondition(format!("record at t = {} lacks P_≤N data", r.t)));
        };
        let t = r.t;
        let bracket = match variant {
            LowFreqVariant::Weak => {
                t.powf(-0.5 * alpha) * (1.0 + n * t.powf(0.5 * alpha) + n * t.sqrt() * y_norm)
            }
            LowFreqVariant::Improved { gamma0 } => {
                t.powf(-0.5 * gamma0)
                    * (1.0 + n * t.powf(0.5 * gamma0) + n * t.powf(0.5 * (1.0 - alpha)) * y_norm)
            }
        };
        let unit = low / bracket;
        required = required.max(unit);
        quotients.push((t, unit / c_budget));
    }
    if quotients.is_empty() {
        return Err(Error::Precondition("no records with t ≥ 1".into()));
    }
    Ok(LowFreqReport {
        variant,
        alpha,
        c_budget,
        y_norm,
        max_quotient: required / c_budget,
        quotients,
        required_budget: required,
    })
}

pub const MIN_DUHAMEL_SAMPLES: usize = 40;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DuhamelReport {
    /// `‖F‖_{L^{2(2+d)/(d+4)}_{tx}}`.
    pub forcing_norm: f64,
    /// `‖u‖_{L^∞_t L²_x}`.
    pub sup_l2: f64,
    /// `‖u‖_{L^{2(2+d)/d}_{tx}}`.
    pub strichartz: f64,
    /// `‖u‖_{L²_t Ḣ¹_x}`.
    pub energy: f64,
}

impl DuhamelReport {
    /// The three output norms divided by the forcing norm; zero forcing
    /// gives zero.
    pub fn ratios(&self) -> [f64; 3] {
        if self.forcing_norm == 0.0 {
            return [0.0; 3];
        }
        [self.sup_l2, self.strichartz, self.energy].map(|v| v / self.forcing_norm)
    }
}

/// `u(t) = ∫_{t₀}^t e^{(t-s)Δ} F(s) ds` for `F` sampled at increasing times
/// and interpolated linearly between samples; each interval is propagated
/// exactly.
pub fn duhamel_norm_check(forcing: &[(f64, Field)]) -> Result<DuhamelReport> {
    if forcing.len() < MIN_DUHAMEL_SAMPLES {
        return Err(Error::Precondition(format!(
            "{} forcing samples, need {MIN_DUHAMEL_SAMPLES}",
            forcing.len()
        )));
    }
    if forcing.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::invalid("forcing", "sample times must increase"));
    }
    let grid = *forcing[0].1.grid();
    for (_, f) in forcing {
        if *f.grid() != grid {
            return Err(Error::GridMismatch("forcing samples on different grids".into()));
        }
    }
    let d = grid.dim() as f64;
    let q_out = 2.0 * (2.0 + d) / d;
    let r_in = 2.0 * (2.0 + d) / (d + 4.0);
    let k2 = grid.wavenumber_sq();

    let mut u = Field::zeros(grid);
    let mut sup_l2 = 0.0f64;
    let mut strich = Vec::with_capacity(forcing.len());
    let mut energy = Vec::with_capacity(forcing.len());
    let mut rhs = Vec::with_capacity(forcing.len());
    for (i, (t, f)) in forcing.iter().enumerate() {
        if i > 0 {
            let (t_prev, f_prev) = &forcing[i - 1];
            let h = t - t_prev;
            let coeffs = u
                .coefficients()
                .iter()
                .zip(f_prev.coefficients().iter().zip(f.coefficients()))
                .zip(&k2)
                .map(|((c, (a, b)), &k2)| {
                    let z = -h * k2;
                    let (p1, p2) = phi_pair(z);
                    c * z.exp() + a * (h * p1) + (b - a) * (h * p2)
                })
                .collect();
            u = Field::from_coefficients(grid, coeffs)?;
        }
        let values = u.to_physical()?;
        sup_l2 = sup_l2.max(u.spectral_energy().sqrt());
        strich.push((*t, lp_norm_of_samples(&values, grid.cell_volume(), q_out)?.powf(q_out)));
        let g = sobolev_norm(&u, 1.0);
        energy.push((*t, g * g));
        rhs.push((*t, lebesgue_norm(f, r_in)?.powf(r_in)));
    }
    Ok(DuhamelReport {
        forcing_norm: trapezoid(&rhs).powf(1.0 / r_in),
        sup_l2,
        strichartz: trapezoid(&strich).powf(1.0 / q_out),
        energy: trapezoid(&energy).sqrt(),
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MemberReport {
    pub seed: u64,
    pub ratios: BTreeMap<String, f64>,
    pub fits: BTreeMap<String, FitResult>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub max: BTreeMap<String, f64>,
    pub median: BTreeMap<String, f64>,
    /// Median fitted slope per fit key.
    pub slopes: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub criterion_id: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config_digest: String,
    pub per_member: Vec<MemberReport>,
    pub aggregates: Aggregates,
    pub verdicts: Vec<Verdict>,
}

impl ExperimentReport {
    /// Sorts members by seed and aggregates in that order.
    pub fn new(config_digest: String, mut per_member: Vec<MemberReport>) -> Self {
        per_member.sort_by_key(|m| m.seed);
        let aggregates = aggregate(&per_member);
        ExperimentReport {
            config_digest,
            per_member,
            aggregates,
            verdicts: Vec::new(),
        }
    }

    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

pub fn aggregate(members: &[MemberReport]) -> Aggregates {
    let mut ratio_values: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let mut slope_values: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for m in members {
        for (k, v) in &m.ratios {
            ratio_values.entry(k).or_default().push(*v);
        }
        for (k, f) in &m.fits {
            slope_values.entry(k).or_default().push(f.slope);
        }
    }
    let mut out = Aggregates::default();
    for (k, vals) in ratio_values {
        out.max.insert(k.to_string(), vals.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        out.median.insert(k.to_string(), median(&vals).expect("non-empty"));
    }
    for (k, vals) in slope_values {
        out.slopes.insert(k.to_string(), median(&vals).expect("non-empty"));
    }
    out
}
