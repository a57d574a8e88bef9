//! The four experiments. Each returns the process exit code; errors that
//! stop a run before its manifest is written surface as [`CliError`].

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use heatlab_core::estimates::{
    duhamel_norm_check, fit_power_law, heat_smoothing_ratio, median, radial_embedding_ratio, strichartz_ratio,
    ExperimentReport, FitResult, MemberReport, Verdict,
};
use heatlab_core::heat_flow::{
    evolve, linear_propagate, write_records_csv, write_snapshot, Coupling, SolverConfig, Trajectory, TrajectoryStatus,
};
use heatlab_core::estimates::linear_l2_oracle;
use heatlab_core::initial_data::{decompose, mismatch_leak, random_band_limited, DecompositionReport};
use heatlab_core::littlewood_paley::{bernstein_derivative_ratio, bernstein_ratio};
use heatlab_core::{Field, Grid};
use serde::Serialize;

use crate::artifacts::{Artifacts, VerdictSummary};
use crate::config::{Experiment, RunConfig};
use crate::ini::ConfigError;
use crate::plot::{plot, Axes, Scale};
use crate::pool::{run_ordered, worker_count};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_BLOWUP: i32 = 2;

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Core(heatlab_core::Error),
    Io { path: PathBuf, source: std::io::Error },
    Usage(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Usage(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<heatlab_core::Error> for CliError {
    fn from(e: heatlab_core::Error) -> Self {
        CliError::Core(e)
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Clone, Debug, Default)]
pub struct Options {
    pub jobs: Option<usize>,
    pub output: Option<PathBuf>,
    pub plots: bool,
}

pub fn load_config(path: &Path, experiment: Experiment, opts: &Options) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut cfg = RunConfig::from_text(&text)?;
    if let Some(declared) = cfg.experiment {
        if declared != experiment {
            return Err(CliError::Usage(format!(
                "config declares experiment = {} but the command is {}",
                declared.name(),
                experiment.name()
            )));
        }
    }
    if let Some(out) = &opts.output {
        cfg.output_dir = out.clone();
    }
    cfg.emit_plots |= opts.plots;
    Ok(cfg)
}

pub fn run(experiment: Experiment, config: &Path, opts: &Options) -> Result<i32, CliError> {
    let cfg = load_config(config, experiment, opts)?;
    let workers = worker_count(opts.jobs);
    match experiment {
        Experiment::Simulate => simulate(&cfg, workers),
        Experiment::Verify => verify(&cfg, workers),
        Experiment::DecaySweep => decay_sweep(&cfg, workers),
        Experiment::Decompose => cmd_decompose(&cfg, workers),
    }
}

fn write(art: &mut Artifacts, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
    let path = art.path_of(rel);
    art.write(rel, bytes).map_err(io_err(&path))
}

fn write_json<T: Serialize>(art: &mut Artifacts, rel: &str, value: &T) -> Result<(), CliError> {
    let path = art.path_of(rel);
    art.write_json(rel, value).map_err(io_err(&path))
}

fn finish(art: Artifacts, cfg: &RunConfig, experiment: Experiment, verdict: VerdictSummary) -> Result<(), CliError> {
    let path = art.root().join(crate::artifacts::MANIFEST_NAME);
    art.finish(&cfg.digest, experiment.name(), verdict).map_err(io_err(&path))?;
    Ok(())
}

fn fit_if_possible(points: &[(f64, f64)], window: (f64, f64)) -> Option<FitResult> {
    let inside = points.iter().filter(|p| p.0 >= window.0 && p.0 <= window.1).count();
    if inside < 2 {
        return None;
    }
    fit_power_law(points, window).ok()
}

/// `(t, l2)` columns of a trajectory CSV.
pub fn read_trajectory_points(path: &Path) -> Result<Vec<(f64, f64)>, CliError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for line in text.lines().filter(|l| !l.starts_with('#') && !l.starts_with("t,")) {
        let mut cols = line.split(',');
        let parse = |c: Option<&str>| c.and_then(|v| v.parse::<f64>().ok());
        match (parse(cols.next()), parse(cols.next())) {
            (Some(t), Some(l2)) => out.push((t, l2)),
            _ => return Err(CliError::Usage(format!("{}: malformed row `{line}`", path.display()))),
        }
    }
    Ok(out)
}

/// Log-log `‖h(t)‖_{L²}` plot of a trajectory CSV already on disk, with the
/// power-law fit over `window` when it holds two or more records.
pub fn trajectory_plot(csv: &Path, window: (f64, f64), title: &str) -> Result<(String, Option<FitResult>), CliError> {
    let points = read_trajectory_points(csv)?;
    let fit = fit_if_possible(&points, window);
    let axes = Axes {
        title,
        x_label: "t",
        y_label: "L2 norm",
        x_scale: Scale::Log,
        y_scale: Scale::Log,
    };
    Ok((plot(&axes, &points, fit.as_ref()), fit))
}

#[derive(Serialize)]
struct SimulateMember {
    seed: u64,
    status: TrajectoryStatus,
    records: usize,
    final_l2: Option<f64>,
    fit: Option<FitResult>,
}

fn simulate(cfg: &RunConfig, workers: usize) -> Result<i32, CliError> {
    let runs = run_ordered(&cfg.seeds, workers, |&seed| -> Result<(u64, Trajectory), CliError> {
        let h0 = cfg.data.build(&cfg.grid, seed)?;
        Ok((seed, evolve(&h0, &cfg.solver, &cfg.schedule)?))
    });
    let mut runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
    runs.sort_by_key(|r| r.0);

    let mut art = Artifacts::create(&cfg.output_dir).map_err(io_err(&cfg.output_dir))?;
    let mut members = Vec::new();
    let mut notes = Vec::new();
    let mut code = EXIT_OK;
    for (seed, traj) in &runs {
        let rel = format!("trajectory_seed{seed}.csv");
        let mut csv = Vec::new();
        write_records_csv(&mut csv, &traj.records)?;
        write(&mut art, &rel, &csv)?;
        if cfg.solver.record_snapshots {
            for (i, snap) in traj.snapshots.iter().enumerate() {
                let mut bytes = Vec::new();
                write_snapshot(&mut bytes, &snap.field, snap.t)?;
                write(&mut art, &format!("snapshots/seed{seed}_{i:04}.hlf"), &bytes)?;
            }
        }
        let points: Vec<(f64, f64)> = traj.records.iter().map(|r| (r.t, r.l2)).collect();
        let mut fit = fit_if_possible(&points, cfg.fit_window);
        if cfg.emit_plots {
            let (svg, plotted) = trajectory_plot(&art.path_of(&rel), cfg.fit_window, &format!("L2 norm, seed {seed}"))?;
            fit = plotted;
            write(&mut art, &format!("trajectory_seed{seed}.svg"), svg.as_bytes())?;
        }
        match traj.status {
            TrajectoryStatus::Completed => {}
            TrajectoryStatus::BlowupDetected { t } => {
                notes.push(format!("seed {seed}: blowup_detected at t = {t:e}"));
                if code == EXIT_OK {
                    code = EXIT_BLOWUP;
                }
            }
            TrajectoryStatus::StepFailure { t } => {
                notes.push(format!("seed {seed}: step_failure at t = {t:e}"));
                code = EXIT_FAILURE;
            }
        }
        members.push(SimulateMember {
            seed: *seed,
            status: traj.status,
            records: traj.records.len(),
            final_l2: traj.records.last().map(|r| r.l2),
            fit,
        });
    }
    write_json(&mut art, "summary.json", &members)?;
    let outcome = match code {
        EXIT_OK => "completed",
        EXIT_BLOWUP => "blowup_detected",
        _ => "step_failure",
    };
    finish(
        art,
        cfg,
        Experiment::Simulate,
        VerdictSummary {
            outcome: outcome.into(),
            pass: code == EXIT_OK,
            notes,
        },
    )?;
    Ok(code)
}

const DERIVATIVE_ORDERS: [f64; 4] = [-1.0, -0.5, 0.5, 1.0];
const RADIAL_S: f64 = 0.75;
const SMOOTHING_TIMES: [f64; 3] = [0.1, 1.0, 10.0];
const SMOOTHING_PAIRS: [(f64, f64); 2] = [(1.0, 2.0), (2.0, f64::INFINITY)];
const DUHAMEL_SAMPLES: usize = 48;
/// Top of the noise spectrum for the Bernstein suites, as a fraction of
/// `k_max` (the dealiased band).
const BAND_LIMIT: f64 = 2.0 / 3.0;

fn exponent_label(p: f64) -> String {
    if p.is_infinite() {
        "inf".into()
    } else {
        format!("{p}")
    }
}

/// Dyadic `N = 2^j` from 2 up to `k_max / 2`.
fn bernstein_scales(grid: &Grid) -> Vec<(i32, f64)> {
    (1..)
        .map(|j| (j, 2f64.powi(j)))
        .take_while(|&(_, n)| n <= 0.5 * grid.k_max())
        .collect()
}

fn span(scales: &[f64]) -> (f64, f64) {
    let lo = scales.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scales.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

struct VerifyMember {
    report: MemberReport,
    bernstein_points: Vec<(f64, f64)>,
    leak_points: Vec<(f64, f64)>,
}

fn verify_member(cfg: &RunConfig, seed: u64) -> Result<VerifyMember, CliError> {
    let grid = cfg.grid;
    let d = grid.dim() as f64;
    let gamma0 = cfg.data.gamma0;
    let h0 = cfg.data.build(&grid, seed)?;
    let mut ratios = BTreeMap::new();
    let mut fits = BTreeMap::new();

    // Bernstein suites run on band-limited noise, not on the rough data.
    let noise = random_band_limited(grid, BAND_LIMIT * grid.k_max(), seed);
    let mut bernstein_points = Vec::new();
    let mut upper = f64::NEG_INFINITY;
    let mut lower = f64::INFINITY;
    for (j, n) in bernstein_scales(&grid) {
        let r = bernstein_ratio(&noise, n, 2.0, f64::INFINITY)?;
        if r > 0.0 {
            ratios.insert(format!("bernstein_2_inf/j={j:+}"), r);
            bernstein_points.push((n, r));
        }
        for s in DERIVATIVE_ORDERS {
            let r = bernstein_derivative_ratio(&noise, n, s)?;
            if r > 0.0 {
                let b = 2f64.powf(s.abs());
                upper = upper.max(r / b);
                lower = lower.min(r * b);
            }
        }
    }
    if upper.is_finite() {
        ratios.insert("derivative_band_upper".into(), upper);
        ratios.insert("derivative_band_lower".into(), lower);
    }

    let floor = 1e-13 * h0.spectral_energy().sqrt();
    let mut leak_points = Vec::new();
    let mut w0_points = Vec::new();
    let mut control = 0.0f64;
    for &n in &cfg.verify.mismatch_scales {
        let leak = mismatch_leak(&h0, n)?;
        if leak > floor {
            leak_points.push((n, leak));
        }
    }
    for &n in &cfg.verify.w0_scales {
        let rep = decompose(&h0, n, gamma0)?.report;
        w0_points.push((n, rep.w0_l2));
        if rep.h0_sobolev > 0.0 {
            control = control.max(rep.v0_sobolev / rep.h0_sobolev);
        }
    }
    ratios.insert("v0_control".into(), control);
    if let Some(f) = fit_if_possible(&leak_points, span(&cfg.verify.mismatch_scales)) {
        fits.insert("mismatch_leak".into(), f);
    }
    if let Some(f) = fit_if_possible(&w0_points, span(&cfg.verify.w0_scales)) {
        fits.insert("w0_l2".into(), f);
    }

    let alpha = d / 2.0 - RADIAL_S;
    ratios.insert(
        "radial_embedding".into(),
        radial_embedding_ratio(&h0, alpha, f64::INFINITY, 2.0, RADIAL_S)?,
    );
    ratios.insert("strichartz".into(), strichartz_ratio(&h0, gamma0, cfg.verify.horizon)?.ratio);

    let horizon = cfg.verify.horizon;
    let forcing = (0..DUHAMEL_SAMPLES)
        .map(|i| {
            let t = horizon * i as f64 / (DUHAMEL_SAMPLES - 1) as f64;
            Ok((t, linear_propagate(&h0, t)?))
        })
        .collect::<heatlab_core::Result<Vec<(f64, Field)>>>()?;
    let [sup, strich, energy] = duhamel_norm_check(&forcing)?.ratios();
    ratios.insert("duhamel_energy".into(), energy);
    ratios.insert("duhamel_strichartz".into(), strich);
    ratios.insert("duhamel_sup_l2".into(), sup);

    for t in SMOOTHING_TIMES {
        for (p, q) in SMOOTHING_PAIRS {
            ratios.insert(
                format!("smoothing_{}_{}/t={t}", exponent_label(p), exponent_label(q)),
                heat_smoothing_ratio(&h0, t, p, q)?,
            );
        }
    }
    Ok(VerifyMember {
        report: MemberReport { seed, ratios, fits },
        bernstein_points,
        leak_points,
    })
}

fn verdict(id: &str, pass: bool, detail: String) -> Verdict {
    Verdict {
        criterion_id: id.into(),
        pass,
        detail,
    }
}

/// Largest max/median spread over the keys with the given prefix.
fn worst_spread(report: &ExperimentReport, prefix: &str) -> Option<(String, f64)> {
    report
        .aggregates
        .max
        .iter()
        .filter(|(k, _)| k.starts_with(prefix))
        .filter_map(|(k, max)| {
            let med = report.aggregates.median[k];
            (med > 0.0).then(|| (k.clone(), max / med))
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
}

fn spread_verdict(report: &ExperimentReport, id: &str, prefix: &str, limit: f64) -> Verdict {
    match worst_spread(report, prefix) {
        Some((key, s)) => verdict(id, s < limit, format!("max/median of {key} = {s:.4} (limit {limit})")),
        None => verdict(id, false, format!("no `{prefix}` ratios were measured")),
    }
}

fn median_slope(report: &ExperimentReport, key: &str) -> Option<f64> {
    let slopes: Vec<f64> = report
        .per_member
        .iter()
        .filter_map(|m| m.fits.get(key).map(|f| f.slope))
        .collect();
    if slopes.len() < report.per_member.len() {
        return None;
    }
    median(&slopes)
}

/// Verdicts for a verify report, derived only from its per-member entries.
pub fn verify_verdicts(cfg: &RunConfig, report: &ExperimentReport) -> Vec<Verdict> {
    let v = &cfg.verify;
    let mut out = Vec::new();

    let bern: Vec<f64> = report
        .per_member
        .iter()
        .flat_map(|m| m.ratios.iter().filter(|(k, _)| k.starts_with("bernstein_2_inf")).map(|(_, r)| *r))
        .collect();
    if bern.is_empty() {
        out.push(verdict("bernstein_spread", false, "no non-empty dyadic bands".into()));
    } else {
        let hi = bern.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = bern.iter().copied().fold(f64::INFINITY, f64::min);
        let spread = hi / lo;
        out.push(verdict(
            "bernstein_spread",
            spread < v.bernstein_spread,
            format!("(2,inf) ratio spread {spread:.4} across dyadic N (limit {})", v.bernstein_spread),
        ));
    }

    let upper = report.aggregates.max.get("derivative_band_upper").copied();
    let lower = report
        .per_member
        .iter()
        .filter_map(|m| m.ratios.get("derivative_band_lower").copied())
        .fold(f64::INFINITY, f64::min);
    out.push(match upper {
        Some(u) => verdict(
            "derivative_bands",
            u <= 1.0 + 1e-12 && lower >= 1.0 - 1e-12,
            format!("max r/2^|s| = {u:.15}, min r*2^|s| = {lower:.15}"),
        ),
        None => verdict("derivative_bands", false, "no non-empty dyadic bands".into()),
    });

    out.push(match median_slope(report, "mismatch_leak") {
        Some(s) => verdict(
            "mismatch_slope",
            s <= v.mismatch_slope,
            format!("median slope {s:.4} (must be <= {})", v.mismatch_slope),
        ),
        None => verdict("mismatch_slope", false, "a member had too few resolvable leak values to fit".into()),
    });
    let w0_limit = cfg.data.gamma0 + v.w0_slope_margin;
    out.push(match median_slope(report, "w0_l2") {
        Some(s) => verdict("w0_slope", s <= w0_limit, format!("median slope {s:.4} (must be <= {w0_limit:.4})")),
        None => verdict("w0_slope", false, "no w0 fit".into()),
    });
    let control = report.aggregates.max.get("v0_control").copied().unwrap_or(f64::INFINITY);
    out.push(verdict(
        "v0_control",
        control < v.v0_control,
        format!("max ‖v0‖/‖h0‖ in H^-gamma0 = {control:.4} (limit {})", v.v0_control),
    ));
    out.push(spread_verdict(report, "radial_spread", "radial_embedding", v.radial_spread));
    out.push(spread_verdict(report, "strichartz_spread", "strichartz", v.strichartz_spread));
    out.push(spread_verdict(report, "duhamel_spread", "duhamel_", v.duhamel_spread));
    out.push(spread_verdict(report, "smoothing_spread", "smoothing_", v.smoothing_spread));
    out
}

fn verify(cfg: &RunConfig, workers: usize) -> Result<i32, CliError> {
    let members = run_ordered(&cfg.seeds, workers, |&seed| verify_member(cfg, seed))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let mut report = ExperimentReport::new(cfg.digest.clone(), members.iter().map(|m| m.report.clone()).collect());
    report.verdicts = verify_verdicts(cfg, &report);

    let mut art = Artifacts::create(&cfg.output_dir).map_err(io_err(&cfg.output_dir))?;
    write_json(&mut art, "report.json", &report)?;
    if cfg.emit_plots {
        let mut sorted: Vec<&VerifyMember> = members.iter().collect();
        sorted.sort_by_key(|m| m.report.seed);
        let bern: Vec<(f64, f64)> = sorted.iter().flat_map(|m| m.bernstein_points.iter().copied()).collect();
        let axes = Axes {
            title: "Bernstein (2, inf) ratio",
            x_label: "N",
            y_label: "ratio",
            x_scale: Scale::Log,
            y_scale: Scale::Log,
        };
        write(&mut art, "bernstein.svg", plot(&axes, &bern, None).as_bytes())?;
        if let Some(first) = sorted.first() {
            let axes = Axes {
                title: &format!("mismatch leak, seed {}", first.report.seed),
                x_label: "N",
                y_label: "leak",
                x_scale: Scale::Log,
                y_scale: Scale::Log,
            };
            let svg = plot(&axes, &first.leak_points, first.report.fits.get("mismatch_leak"));
            write(&mut art, "mismatch.svg", svg.as_bytes())?;
        }
    }
    let failed: Vec<String> = report
        .verdicts
        .iter()
        .filter(|v| !v.pass)
        .map(|v| format!("{}: {}", v.criterion_id, v.detail))
        .collect();
    let pass = failed.is_empty();
    finish(
        art,
        cfg,
        Experiment::Verify,
        VerdictSummary {
            outcome: format!("{}/{} verdicts pass", report.verdicts.len() - failed.len(), report.verdicts.len()),
            pass,
            notes: failed,
        },
    )?;
    Ok(if pass { EXIT_OK } else { EXIT_FAILURE })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlopeRow {
    pub gamma0: f64,
    pub seed: u64,
    pub mode: &'static str,
    pub expected: f64,
    pub status: String,
    pub fit: Option<FitResult>,
}

fn status_label(status: &TrajectoryStatus) -> String {
    match status {
        TrajectoryStatus::Completed => "completed".into(),
        TrajectoryStatus::BlowupDetected { t } => format!("blowup_detected@{t:e}"),
        TrajectoryStatus::StepFailure { t } => format!("step_failure@{t:e}"),
    }
}

fn sweep_unit(cfg: &RunConfig, gamma0: f64, seed: u64) -> Result<Vec<SlopeRow>, CliError> {
    let mut data = cfg.data.clone();
    data.gamma0 = gamma0;
    let expected = -0.5 * gamma0;
    let window = cfg.sweep.window;
    let h0 = data.build(&cfg.grid, seed)?;
    let mut rows = Vec::new();

    let samples = cfg.solver.resolved_samples();
    let linear: Vec<(f64, f64)> = samples.iter().map(|&t| (t, linear_l2_oracle(&h0, t))).collect();
    rows.push(SlopeRow {
        gamma0,
        seed,
        mode: "linear",
        expected,
        status: "completed".into(),
        fit: fit_if_possible(&linear, window),
    });

    let mut runs = vec![("defocusing", Coupling::Defocusing, h0.clone())];
    if cfg.sweep.focusing {
        data.amplitude = cfg.sweep.focusing_amplitude;
        runs.push(("focusing", Coupling::Focusing, data.build(&cfg.grid, seed)?));
    }
    for (mode, coupling, init) in runs {
        let solver = SolverConfig {
            coupling,
            ..cfg.solver.clone()
        };
        let traj = evolve(&init, &solver, &cfg.schedule)?;
        let points: Vec<(f64, f64)> = traj.records.iter().map(|r| (r.t, r.l2)).collect();
        rows.push(SlopeRow {
            gamma0,
            seed,
            mode,
            expected,
            status: status_label(&traj.status),
            fit: if traj.is_completed() { fit_if_possible(&points, window) } else { None },
        });
    }
    Ok(rows)
}

pub fn sweep_key(mode: &str, gamma0: f64) -> String {
    format!("{mode}/gamma0={gamma0:.4}")
}

/// One verdict per (mode, γ₀): the median slope against `-γ₀/2`, every
/// member's r², and every run completing.
pub fn sweep_verdicts(cfg: &RunConfig, rows: &[SlopeRow]) -> Vec<Verdict> {
    let mut groups: BTreeMap<(usize, &str), Vec<&SlopeRow>> = BTreeMap::new();
    for r in rows {
        let gi = cfg.sweep.gammas.iter().position(|&g| g == r.gamma0).unwrap_or(usize::MAX);
        groups.entry((gi, r.mode)).or_default().push(r);
    }
    let mut out = Vec::new();
    for ((_, mode), members) in groups {
        let gamma0 = members[0].gamma0;
        let id = sweep_key(mode, gamma0);
        if let Some(bad) = members.iter().find(|r| r.status != "completed") {
            out.push(verdict(&id, false, format!("seed {}: {}", bad.seed, bad.status)));
            continue;
        }
        if let Some(bad) = members.iter().find(|r| r.fit.is_none()) {
            out.push(verdict(&id, false, format!("seed {}: fewer than two records in the fit window", bad.seed)));
            continue;
        }
        let slopes: Vec<f64> = members.iter().map(|r| r.fit.as_ref().map_or(f64::NAN, |f| f.slope)).collect();
        let r2 = members
            .iter()
            .map(|r| r.fit.as_ref().map_or(0.0, |f| f.r_squared))
            .fold(f64::INFINITY, f64::min);
        let med = median(&slopes).unwrap_or(f64::NAN);
        let (ok_slope, target) = if gamma0 == 0.0 {
            (med.abs() <= cfg.sweep.zero_tolerance, format!("|slope| <= {}", cfg.sweep.zero_tolerance))
        } else {
            (
                (med - members[0].expected).abs() <= cfg.sweep.tolerance,
                format!("{:.4} ± {}", members[0].expected, cfg.sweep.tolerance),
            )
        };
        let ok_r2 = r2 >= cfg.sweep.min_r_squared;
        out.push(verdict(
            &id,
            ok_slope && ok_r2,
            format!(
                "median slope {med:.4} (want {target}); min r² {r2:.4} (want >= {})",
                cfg.sweep.min_r_squared
            ),
        ));
    }
    out
}

fn decay_sweep(cfg: &RunConfig, workers: usize) -> Result<i32, CliError> {
    let units: Vec<(f64, u64)> = cfg
        .sweep
        .gammas
        .iter()
        .flat_map(|&g| cfg.seeds.iter().map(move |&s| (g, s)))
        .collect();
    let results = run_ordered(&units, workers, |&(g, s)| sweep_unit(cfg, g, s));
    let mut rows: Vec<SlopeRow> = Vec::new();
    for r in results {
        rows.extend(r?);
    }

    let mut by_seed: BTreeMap<u64, MemberReport> = BTreeMap::new();
    for r in &rows {
        let m = by_seed.entry(r.seed).or_insert_with(|| MemberReport {
            seed: r.seed,
            ..MemberReport::default()
        });
        if let Some(f) = r.fit {
            m.fits.insert(sweep_key(r.mode, r.gamma0), f);
        }
    }
    let mut report = ExperimentReport::new(cfg.digest.clone(), by_seed.into_values().collect());
    report.verdicts = sweep_verdicts(cfg, &rows);

    let mut csv = String::from("#schema=1\ngamma0,seed,mode,slope,intercept,r_squared,expected,status\n");
    for r in &rows {
        let (slope, intercept, r2) = match &r.fit {
            Some(f) => (format!("{:e}", f.slope), format!("{:e}", f.intercept), format!("{:e}", f.r_squared)),
            None => Default::default(),
        };
        csv.push_str(&format!(
            "{:e},{},{},{slope},{intercept},{r2},{:e},{}\n",
            r.gamma0, r.seed, r.mode, r.expected, r.status
        ));
    }
    let mut art = Artifacts::create(&cfg.output_dir).map_err(io_err(&cfg.output_dir))?;
    write(&mut art, "slopes.csv", csv.as_bytes())?;
    write_json(&mut art, "report.json", &report)?;
    if cfg.emit_plots {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.mode == "defocusing")
            .filter_map(|r| r.fit.map(|f| (r.gamma0, f.slope)))
            .collect();
        let axes = Axes {
            title: "fitted L2 decay slope (defocusing)",
            x_label: "gamma0",
            y_label: "slope",
            x_scale: Scale::Linear,
            y_scale: Scale::Linear,
        };
        write(&mut art, "slopes.svg", plot(&axes, &pts, None).as_bytes())?;
    }
    let failed: Vec<String> = report
        .verdicts
        .iter()
        .filter(|v| !v.pass)
        .map(|v| format!("{}: {}", v.criterion_id, v.detail))
        .collect();
    let pass = failed.is_empty();
    finish(
        art,
        cfg,
        Experiment::DecaySweep,
        VerdictSummary {
            outcome: format!("{}/{} verdicts pass", report.verdicts.len() - failed.len(), report.verdicts.len()),
            pass,
            notes: failed,
        },
    )?;
    Ok(if pass { EXIT_OK } else { EXIT_FAILURE })
}

#[derive(Serialize)]
struct DecomposeRow {
    seed: u64,
    #[serde(flatten)]
    report: DecompositionReport,
    v0_control: f64,
    mismatch_leak: f64,
}

fn cmd_decompose(cfg: &RunConfig, workers: usize) -> Result<i32, CliError> {
    let per_seed = run_ordered(&cfg.seeds, workers, |&seed| -> Result<Vec<DecomposeRow>, CliError> {
        let h0 = cfg.data.build(&cfg.grid, seed)?;
        cfg.decompose
            .scales
            .iter()
            .map(|&n| {
                let report = decompose(&h0, n, cfg.data.gamma0)?.report;
                let v0_control = if report.h0_sobolev > 0.0 {
                    report.v0_sobolev / report.h0_sobolev
                } else {
                    0.0
                };
                Ok(DecomposeRow {
                    seed,
                    report,
                    v0_control,
                    mismatch_leak: mismatch_leak(&h0, n)?,
                })
            })
            .collect()
    });
    let mut rows = Vec::new();
    for r in per_seed {
        rows.extend(r?);
    }
    let mut art = Artifacts::create(&cfg.output_dir).map_err(io_err(&cfg.output_dir))?;
    write_json(&mut art, "decompose.json", &rows)?;
    if cfg.emit_plots {
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.report.scale, r.mismatch_leak)).collect();
        let axes = Axes {
            title: "mismatch leak",
            x_label: "N",
            y_label: "leak",
            x_scale: Scale::Log,
            y_scale: Scale::Log,
        };
        write(&mut art, "mismatch.svg", plot(&axes, &pts, None).as_bytes())?;
    }
    let warnings = rows.iter().filter(|r| r.report.support_warning).count();
    finish(
        art,
        cfg,
        Experiment::Decompose,
        VerdictSummary {
            outcome: format!("{} rows, {warnings} support warnings", rows.len()),
            pass: warnings == 0,
            notes: Vec::new(),
        },
    )?;
    Ok(EXIT_OK)
}
