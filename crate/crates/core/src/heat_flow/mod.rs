//! Heat semigroup and the nonlinear flow `∂ₜh = Δh + μ|h|^{4/d}h`.

mod io;
mod stepper;

pub use io::{read_snapshot, write_records_csv, write_snapshot, CSV_HEADER, CSV_SCHEMA};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::initial_data::{decompose, DecompositionReport};
use crate::littlewood_paley::{project_unchecked, DyadicProjector, ProjectorMode};
use crate::spectral::{gradient_norm, lp_norm_of_samples, nonlinearity_of_samples, Field, Grid};
pub(crate) use stepper::phi_pair;
use stepper::Etd2;

/// Sign of the nonlinearity. `Off` gives the linear heat flow.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Coupling {
    Focusing,
    Defocusing,
    Off,
}

impl Coupling {
    pub fn mu(self) -> f64 {
        match self {
            Coupling::Focusing => 1.0,
            Coupling::Defocusing => -1.0,
            Coupling::Off => 0.0,
        }
    }

    pub fn from_mu(mu: f64) -> Result<Self> {
        match mu {
            m if m == 1.0 => Ok(Coupling::Focusing),
            m if m == -1.0 => Ok(Coupling::Defocusing),
            m if m == 0.0 => Ok(Coupling::Off),
            m => Err(Error::invalid("mu", format!("{m} is not one of -1, 0, 1"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum DtPolicy {
    Fixed(f64),
    /// `dtₙ = min(dt0 · ratioⁿ, dt_max)`.
    Geometric { dt0: f64, ratio: f64, dt_max: f64 },
}

impl Default for DtPolicy {
    fn default() -> Self {
        DtPolicy::Geometric {
            dt0: 1e-4,
            ratio: 1.02,
            dt_max: 0.05,
        }
    }
}

impl DtPolicy {
    pub fn dt_at(&self, step: usize) -> f64 {
        match *self {
            DtPolicy::Fixed(dt) => dt,
            DtPolicy::Geometric { dt0, ratio, dt_max } => {
                (dt0 * ratio.powi(step.min(i32::MAX as usize) as i32)).min(dt_max)
            }
        }
    }

    /// Same policy with every step length divided by `factor`.
    pub fn refined(&self, factor: f64) -> DtPolicy {
        match *self {
            DtPolicy::Fixed(dt) => DtPolicy::Fixed(dt / factor),
            DtPolicy::Geometric { dt0, ratio, dt_max } => DtPolicy::Geometric {
                dt0: dt0 / factor,
                ratio,
                dt_max: dt_max / factor,
            },
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            DtPolicy::Fixed(dt) => dt > 0.0 && dt.is_finite(),
            DtPolicy::Geometric { dt0, ratio, dt_max } => {
                dt0 > 0.0 && ratio >= 1.0 && dt_max >= dt0 && dt_max.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("dt_policy", format!("{self:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub coupling: Coupling,
    pub t_end: f64,
    pub dt_policy: DtPolicy,
    pub sample_times: Vec<f64>,
    pub record_snapshots: bool,
    pub blowup_threshold: f64,
}

pub const DEFAULT_SAMPLE_COUNT: usize = 60;
pub const DEFAULT_FIRST_SAMPLE: f64 = 1e-3;
pub const DEFAULT_BLOWUP_THRESHOLD: f64 = 1e6;

impl SolverConfig {
    pub fn new(coupling: Coupling, t_end: f64) -> Self {
        SolverConfig {
            coupling,
            t_end,
            dt_policy: DtPolicy::default(),
            sample_times: default_sample_times(t_end, DEFAULT_SAMPLE_COUNT),
            record_snapshots: false,
            blowup_threshold: DEFAULT_BLOWUP_THRESHOLD,
        }
    }

    pub fn with_dt(mut self, policy: DtPolicy) -> Self {
        self.dt_policy = policy;
        self
    }

    pub fn with_samples(mut self, samples: Vec<f64>) -> Self {
        self.sample_times = samples;
        self
    }

    /// Adds the pair `t ± delta` around every probe time so that
    /// [`energy_identity_residual`] can difference symmetrically there.
    pub fn with_energy_probes(mut self, probes: &[f64], delta: f64) -> Self {
        for &t in probes {
            self.sample_times.extend([t - delta, t, t + delta]);
        }
        self
    }

    /// Sorted, deduplicated sample times with `t_end` appended.
    pub fn resolved_samples(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self
            .sample_times
            .iter()
            .copied()
            .filter(|&t| t >= 0.0 && t <= self.t_end)
            .collect();
        s.push(self.t_end);
        s.sort_by(f64::total_cmp);
        s.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * self.t_end);
        s
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::invalid("t_end", format!("{} is not positive", self.t_end)));
        }
        if let Some(t) = self
            .sample_times
            .iter()
            .find(|&&t| !(t >= 0.0 && t <= self.t_end))
        {
            return Err(Error::invalid(
                "sample_times",
                format!("{t} lies outside [0, {}]", self.t_end),
            ));
        }
        if !(self.blowup_threshold > 0.0) {
            return Err(Error::invalid("blowup_threshold", "must be positive"));
        }
        self.dt_policy.validate()
    }
}

/// `count` geometrically spaced times from `1e-3` to `t_end` inclusive.
pub fn default_sample_times(t_end: f64, count: usize) -> Vec<f64> {
    if !(t_end > DEFAULT_FIRST_SAMPLE) || count < 2 {
        return vec![t_end];
    }
    let ratio = (t_end / DEFAULT_FIRST_SAMPLE).powf(1.0 / (count - 1) as f64);
    let mut out: Vec<f64> = (0..count)
        .map(|i| DEFAULT_FIRST_SAMPLE * ratio.powi(i as i32))
        .collect();
    *out.last_mut().unwrap() = t_end;
    out
}

/// Frequency cutoff `N(t)` attached to the recorded low-frequency norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum CutoffSchedule {
    None,
    /// `N(t) = √(2α/t)`.
    Sqrt { alpha: f64 },
}

impl CutoffSchedule {
    pub fn validate(&self, gamma0: Option<f64>) -> Result<()> {
        if let CutoffSchedule::Sqrt { alpha } = *self {
            if !(alpha > 0.0) {
                return Err(Error::invalid("alpha", format!("{alpha} must be positive")));
            }
            if let Some(g) = gamma0 {
                if alpha > g + 1e-15 {
                    return Err(Error::invalid("alpha", format!("{alpha} exceeds gamma0 = {g}")));
                }
            }
        }
        Ok(())
    }

    /// Unclamped `N(t)`; infinite at `t = 0`.
    pub fn scale_at(&self, t: f64) -> Option<f64> {
        match *self {
            CutoffSchedule::None => None,
            CutoffSchedule::Sqrt { alpha } => Some((2.0 * alpha / t).sqrt()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub t: f64,
    pub l2: f64,
    /// `‖h‖_{L^{2+4/d}}`.
    pub lq: f64,
    /// `‖∇h‖_{L²}`.
    pub h1: f64,
    pub linf: f64,
    pub lowfreq_l2: Option<f64>,
    /// Cutoff used for `lowfreq_l2`, after clamping to `2 k_max`.
    pub n_of_t: Option<f64>,
}

impl Record {
    pub fn measure(field: &Field, t: f64, schedule: &CutoffSchedule) -> Record {
        let grid = *field.grid();
        let values = field.physical_unchecked();
        Self::from_samples(field, &values, t, schedule, &grid)
    }

    fn from_samples(field: &Field, values: &[f64], t: f64, schedule: &CutoffSchedule, grid: &Grid) -> Record {
        let cell = grid.cell_volume();
        let q = critical_exponent(grid.dim());
        let (lowfreq_l2, n_of_t) = match schedule.scale_at(t) {
            Some(n) => {
                let n = n.min(2.0 * grid.k_max());
                let proj = DyadicProjector::new(n, ProjectorMode::Leq).expect("positive scale");
                let low = project_unchecked(field, &proj);
                (Some(low.spectral_energy().sqrt()), Some(n))
            }
            None => (None, None),
        };
        Record {
            t,
            l2: lp_norm_of_samples(values, cell, 2.0).expect("p = 2"),
            lq: lp_norm_of_samples(values, cell, q).expect("q > 2"),
            h1: gradient_norm(field),
            linf: lp_norm_of_samples(values, cell, f64::INFINITY).expect("p = ∞"),
            lowfreq_l2,
            n_of_t,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.l2.is_finite() && self.lq.is_finite() && self.h1.is_finite() && self.linf.is_finite()
    }
}

/// `2 + 4/d`.
pub fn critical_exponent(dim: usize) -> f64 {
    2.0 + 4.0 / dim as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum TrajectoryStatus {
    Completed,
    BlowupDetected { t: f64 },
    StepFailure { t: f64 },
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub t: f64,
    pub field: Field,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub grid: Grid,
    pub coupling: Coupling,
    pub schedule: CutoffSchedule,
    pub status: TrajectoryStatus,
    pub records: Vec<Record>,
    pub snapshots: Vec<Snapshot>,
}

impl Trajectory {
    pub fn is_completed(&self) -> bool {
        self.status == TrajectoryStatus::Completed
    }

    pub fn records_in(&self, window: (f64, f64)) -> impl Iterator<Item = &Record> {
        self.records
            .iter()
            .filter(move |r| r.t >= window.0 && r.t <= window.1)
    }
}

/// `e^{tΔ} f`.
pub fn linear_propagate(f: &Field, t: f64) -> Result<Field> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::invalid("time", format!("{t} is negative or not finite")));
    }
    if t == 0.0 {
        return Ok(f.clone());
    }
    Ok(f.apply_multiplier(|k2| (-t * k2).exp()))
}

/// One ETD2RK step of size `dt` with the configuration's coupling.
pub fn step(f: &Field, dt: f64, cfg: &SolverConfig) -> Result<Field> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid("dt", format!("{dt} is not positive")));
    }
    if f.coefficients().iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::invalid("field", "contains non-finite coefficients"));
    }
    let mut etd = Etd2::new(*f.grid());
    let drive = Drive::Autonomous {
        mu: cfg.coupling.mu(),
    };
    let (next, _) = advance_once(&mut etd, &drive, f, 0.0, dt);
    if !all_finite(&next) {
        return Err(Error::StepFailure { t: dt });
    }
    Ok(next)
}

enum Drive {
    /// `μ|u|^{4/d}u`.
    Autonomous { mu: f64 },
    /// `μ|u + e^{tΔ}v₀|^{4/d}(u + e^{tΔ}v₀)`.
    Shifted { mu: f64, v0: Field, k2: Vec<f64> },
}

impl Drive {
    fn mu(&self) -> f64 {
        match self {
            Drive::Autonomous { mu } | Drive::Shifted { mu, .. } => *mu,
        }
    }

    /// Nonlinear term at `(u, t)` together with `max |u + shift|`, which is
    /// NaN when any sample is not finite.
    fn eval(&self, u: &Field, t: f64) -> (Field, f64) {
        let grid = *u.grid();
        let values = match self {
            Drive::Autonomous { .. } => u.physical_unchecked(),
            Drive::Shifted { v0, k2, .. } => {
                let coeffs = u
                    .coefficients()
                    .iter()
                    .zip(v0.coefficients())
                    .zip(k2)
                    .map(|((a, b), &k2)| a + b * (-t * k2).exp())
                    .collect();
                Field::from_coefficients(grid, coeffs)
                    .expect("same grid")
                    .physical_unchecked()
            }
        };
        let sup = values.iter().fold(0.0f64, |m, v| {
            if v.is_finite() {
                m.max(v.abs())
            } else {
                f64::NAN
            }
        });
        (nonlinearity_of_samples(grid, &values, self.mu()), sup)
    }
}

fn all_finite(f: &Field) -> bool {
    f.coefficients()
        .iter()
        .all(|c| c.re.is_finite() && c.im.is_finite())
}

/// One step; returns the new state and `max |u|` at the start of the step
/// (`0` for the linear flow, where it is not computed).
fn advance_once(etd: &mut Etd2, drive: &Drive, u: &Field, t: f64, h: f64) -> (Field, f64) {
    if drive.mu() == 0.0 {
        return (etd.linear_step(u, h), 0.0);
    }
    let (n_u, sup) = drive.eval(u, t);
    let next = etd.step(u, t, h, &n_u, &mut |a: &Field, s: f64| drive.eval(a, s).0);
    (next, sup)
}

/// Why an integration stopped before reaching its target.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Halt {
    Blowup(f64),
    Failure(f64),
}

struct Integrator {
    etd: Etd2,
    drive: Drive,
    policy: DtPolicy,
    threshold: f64,
    state: Field,
    t: f64,
    steps: usize,
}

impl Integrator {
    fn new(state: Field, drive: Drive, cfg: &SolverConfig) -> Self {
        Integrator {
            etd: Etd2::new(*state.grid()),
            drive,
            policy: cfg.dt_policy,
            threshold: cfg.blowup_threshold,
            state,
            t: 0.0,
            steps: 0,
        }
    }

    /// Steps until `t == target` exactly; the final step is shortened so it
    /// lands on the target.
    fn advance_to(&mut self, target: f64) -> std::result::Result<(), Halt> {
        while self.t < target {
            let nominal = self.policy.dt_at(self.steps);
            let remaining = target - self.t;
            let lands = remaining <= nominal * (1.0 + 1e-9);
            let h = if lands { remaining } else { nominal };
            let (next, sup) = advance_once(&mut self.etd, &self.drive, &self.state, self.t, h);
            if sup.is_nan() {
                return Err(Halt::Failure(self.t));
            }
            if sup > self.threshold {
                return Err(Halt::Blowup(self.t));
            }
            if !all_finite(&next) {
                return Err(Halt::Failure(self.t + h));
            }
            self.state = next;
            self.t = if lands { target } else { self.t + h };
            self.steps += 1;
        }
        Ok(())
    }
}

/// Integrates from `h0` and records observables at the sample times.
pub fn evolve(h0: &Field, cfg: &SolverConfig, schedule: &CutoffSchedule) -> Result<Trajectory> {
    cfg.validate()?;
    schedule.validate(None)?;
    if !all_finite(h0) {
        return Err(Error::invalid("h0", "contains non-finite coefficients"));
    }
    let mut integ = Integrator::new(
        h0.clone(),
        Drive::Autonomous {
            mu: cfg.coupling.mu(),
        },
        cfg,
    );
    let mut traj = Trajectory {
        grid: *h0.grid(),
        coupling: cfg.coupling,
        schedule: *schedule,
        status: TrajectoryStatus::Completed,
        records: Vec::new(),
        snapshots: Vec::new(),
    };
    for ts in cfg.resolved_samples() {
        match integ.advance_to(ts) {
            Ok(()) => {}
            Err(halt) => {
                finish_halted(&mut traj, &integ, halt, schedule);
                return Ok(traj);
            }
        }
        let rec = Record::measure(&integ.state, ts, schedule);
        if !rec.is_finite() {
            traj.status = TrajectoryStatus::StepFailure { t: ts };
            return Ok(traj);
        }
        traj.records.push(rec);
        if cfg.record_snapshots {
            traj.snapshots.push(Snapshot {
                t: ts,
                field: integ.state.clone(),
            });
        }
        if rec.linf > cfg.blowup_threshold {
            traj.status = TrajectoryStatus::BlowupDetected { t: ts };
            return Ok(traj);
        }
    }
    Ok(traj)
}

fn finish_halted(traj: &mut Trajectory, integ: &Integrator, halt: Halt, schedule: &CutoffSchedule) {
    match halt {
        Halt::Blowup(t) => {
            traj.status = TrajectoryStatus::BlowupDetected { t };
            // The record that tripped the detector, so the L^∞ column shows it.
            if traj.records.last().map_or(true, |r| r.t < t) {
                traj.records.push(Record::measure(&integ.state, t, schedule));
            }
        }
        Halt::Failure(t) => traj.status = TrajectoryStatus::StepFailure { t },
    }
}

/// Result of [`evolve_split`].
#[derive(Clone, Debug)]
pub struct SplitRun {
    /// `v_L(t) = e^{tΔ}v₀` at the sample times.
    pub linear: Trajectory,
    /// `w = h - v_L`.
    pub nonlinear: Trajectory,
    /// `h` from a direct integration with the same step sequence.
    pub full: Trajectory,
    /// `(t, ‖v_L + w - h‖_{L²} / ‖h‖_{L²})`.
    pub reconstruction: Vec<(f64, f64)>,
    pub decomposition: DecompositionReport,
}

impl SplitRun {
    pub fn max_reconstruction_error(&self) -> f64 {
        self.reconstruction.iter().map(|r| r.1).fold(0.0, f64::max)
    }
}

/// Splits `h0 = v₀ + w₀` at frequency `scale`, evolves `v_L` exactly and `w`
/// through `∂ₜw = Δw + μ|w + v_L|^{4/d}(w + v_L)`, and compares the sum with
/// a direct integration of `h`.
pub fn evolve_split(h0: &Field, scale: f64, gamma0: f64, cfg: &SolverConfig) -> Result<SplitRun> {
    cfg.validate()?;
    let parts = decompose(h0, scale, gamma0)?;
    let grid = *h0.grid();
    let mu = cfg.coupling.mu();
    let none = CutoffSchedule::None;
    let blank = |status| Trajectory {
        grid,
        coupling: cfg.coupling,
        schedule: none,
        status,
        records: Vec::new(),
        snapshots: Vec::new(),
    };
    let mut linear = blank(TrajectoryStatus::Completed);
    linear.coupling = Coupling::Off;
    let mut nonlinear = blank(TrajectoryStatus::Completed);
    let mut full = blank(TrajectoryStatus::Completed);
    let mut reconstruction = Vec::new();

    let mut w = Integrator::new(
        parts.w0.clone(),
        Drive::Shifted {
            mu,
            v0: parts.v0.clone(),
            k2: grid.wavenumber_sq(),
        },
        cfg,
    );
    let mut h = Integrator::new(h0.clone(), Drive::Autonomous { mu }, cfg);
    let mut w_alive = true;
    let mut h_alive = true;

    for ts in cfg.resolved_samples() {
        let v_l = linear_propagate(&parts.v0, ts)?;
        linear.records.push(Record::measure(&v_l, ts, &none));
        if w_alive {
            match w.advance_to(ts) {
                Ok(()) => nonlinear.records.push(Record::measure(&w.state, ts, &none)),
                Err(halt) => {
                    finish_halted(&mut nonlinear, &w, halt, &none);
                    w_alive = false;
                }
            }
        }
        if h_alive {
            match h.advance_to(ts) {
                Ok(()) => full.records.push(Record::measure(&h.state, ts, &none)),
                Err(halt) => {
                    finish_halted(&mut full, &h, halt, &none);
                    h_alive = false;
                }
            }
        }
        if !(w_alive && h_alive) {
            break;
        }
        let sum = v_l.add(&w.state)?;
        let diff = sum.sub(&h.state)?.spectral_energy().sqrt();
        let norm = h.state.spectral_energy().sqrt();
        let rel = if norm > 0.0 {
            diff / norm
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        reconstruction.push((ts, rel));
        if cfg.record_snapshots {
            linear.snapshots.push(Snapshot { t: ts, field: v_l });
            nonlinear.snapshots.push(Snapshot {
                t: ts,
                field: w.state.clone(),
            });
            full.snapshots.push(Snapshot {
                t: ts,
                field: h.state.clone(),
            });
        }
    }
    Ok(SplitRun {
        linear,
        nonlinear,
        full,
        reconstruction,
        decomposition: parts.report,
    })
}

/// Largest relative residual of `½ d/dt ‖h‖² = -‖∇h‖² + μ‖h‖_q^q`,
/// `q = 2 + 4/d`, over records in `window` that have equally spaced
/// neighbours on both sides (see [`SolverConfig::with_energy_probes`]).
///
/// The derivative is the centred difference of the recorded `‖h‖²`; the
/// residual is normalised by `‖∇h‖² + ‖h‖_q^q`.
pub fn energy_identity_residual(traj: &Trajectory, window: (f64, f64)) -> Result<f64> {
    let mu = traj.coupling.mu();
    let q = critical_exponent(traj.grid.dim());
    let recs = &traj.records;
    let mut worst: Option<f64> = None;
    for i in 1..recs.len().saturating_sub(1) {
        let (a, b, c) = (&recs[i - 1], &recs[i], &recs[i + 1]);
        if b.t < window.0 || b.t > window.1 {
            continue;
        }
        let (h1, h2) = (b.t - a.t, c.t - b.t);
        if (h1 - h2).abs() > 1e-6 * (h1 + h2) {
            continue;
        }
        let lhs = 0.25 * (c.l2 * c.l2 - a.l2 * a.l2) / h1;
        let dissipation = b.h1 * b.h1;
        let reaction = b.lq.powf(q);
        let rhs = -dissipation + mu * reaction;
        let scale = dissipation + reaction;
        let r = if scale > 0.0 {
            (lhs - rhs).abs() / scale
        } else {
            (lhs - rhs).abs()
        };
        worst = Some(worst.map_or(r, |w: f64| w.max(r)));
    }
    worst.ok_or_else(|| {
        Error::Precondition("no record in the window has symmetric neighbours".into())
    })
}

/// `h ↦ λ^{d/2} h(λ·)` moved onto the grid of period `L/λ` with the same
/// number of points: the coefficients are reused and rescaled.
pub fn rescale_field(f: &Field, lambda: f64) -> Result<Field> {
    let g = f.grid();
    let target = Grid::new(g.dim(), g.period() / lambda, g.points())?;
    let factor = lambda.powf(0.5 * g.dim() as f64);
    Field::from_coefficients(target, f.scaled(factor).into_coefficients())
}
