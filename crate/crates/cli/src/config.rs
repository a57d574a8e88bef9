//! Typed run configuration, validated before any compute.

use std::path::PathBuf;
use std::str::FromStr;

use heatlab_core::heat_flow::{
    default_sample_times, Coupling, CutoffSchedule, DtPolicy, SolverConfig,
    DEFAULT_BLOWUP_THRESHOLD, DEFAULT_SAMPLE_COUNT,
};
use heatlab_core::initial_data::{annular_bump, gaussian_bump, sample_rough_radial, validate_gamma0, RoughDataSpec};
use heatlab_core::{Field, Grid};
use sha2::{Digest, Sha256};

use crate::ini::{ConfigError, Ini};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Simulate,
    Verify,
    DecaySweep,
    Decompose,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::Verify => "verify",
            Experiment::DecaySweep => "decay-sweep",
            Experiment::Decompose => "decompose",
        }
    }
}

impl FromStr for Experiment {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "simulate" => Ok(Experiment::Simulate),
            "verify" => Ok(Experiment::Verify),
            "decay-sweep" => Ok(Experiment::DecaySweep),
            "decompose" => Ok(Experiment::Decompose),
            other => Err(format!("unknown experiment `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DataKind {
    Rough,
    Gaussian { width: f64 },
    Annular { r_in: f64, r_out: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DataConfig {
    pub kind: DataKind,
    pub gamma0: f64,
    pub amplitude: f64,
    pub epsilon0: f64,
    pub band: Option<(f64, f64)>,
}

impl DataConfig {
    pub fn rough_spec(&self, grid: &Grid, seed: u64) -> RoughDataSpec {
        let mut spec = RoughDataSpec::new(self.gamma0, grid.dim(), self.amplitude, seed);
        spec.epsilon0 = self.epsilon0;
        spec.band = self.band;
        spec
    }

    /// Initial field for one ensemble member.
    pub fn build(&self, grid: &Grid, seed: u64) -> heatlab_core::Result<Field> {
        match self.kind {
            DataKind::Rough => sample_rough_radial(&self.rough_spec(grid, seed), grid),
            DataKind::Gaussian { width } => Ok(gaussian_bump(*grid, self.amplitude, width)),
            DataKind::Annular { r_in, r_out } => Ok(annular_bump(*grid, self.amplitude, r_in, r_out)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub gammas: Vec<f64>,
    pub focusing: bool,
    pub focusing_amplitude: f64,
    pub window: (f64, f64),
    pub tolerance: f64,
    pub zero_tolerance: f64,
    pub min_r_squared: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyConfig {
    pub horizon: f64,
    pub bernstein_spread: f64,
    pub mismatch_slope: f64,
    pub w0_slope_margin: f64,
    pub v0_control: f64,
    pub radial_spread: f64,
    pub strichartz_spread: f64,
    pub duhamel_spread: f64,
    pub smoothing_spread: f64,
    pub mismatch_scales: Vec<f64>,
    pub w0_scales: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecomposeConfig {
    pub scales: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub experiment: Option<Experiment>,
    pub grid: Grid,
    pub data: DataConfig,
    pub solver: SolverConfig,
    pub schedule: CutoffSchedule,
    pub fit_window: (f64, f64),
    /// Sorted and deduplicated.
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub emit_plots: bool,
    pub sweep: SweepConfig,
    pub verify: VerifyConfig,
    pub decompose: DecomposeConfig,
    /// SHA-256 of the canonicalised config text.
    pub digest: String,
}

const KNOWN: &[(&str, &[&str])] = &[
    ("run", &["experiment", "output_dir", "emit_plots"]),
    ("grid", &["dim", "period", "points"]),
    ("data", &["kind", "gamma0", "amplitude", "epsilon0", "band_lo", "band_hi", "width", "r_in", "r_out"]),
    (
        "solver",
        &["mu", "t_end", "dt", "dt0", "ratio", "dt_max", "samples", "record_snapshots", "blowup_threshold", "fit_lo", "fit_hi"],
    ),
    ("schedule", &["kind", "alpha"]),
    ("ensemble", &["seeds", "count", "base_seed"]),
    ("sweep", &["gamma0", "focusing", "focusing_amplitude", "fit_lo", "fit_hi", "tolerance", "zero_tolerance", "min_r_squared"]),
    (
        "verify",
        &[
            "horizon",
            "bernstein_spread",
            "mismatch_slope",
            "w0_slope_margin",
            "v0_control",
            "radial_spread",
            "strichartz_spread",
            "duhamel_spread",
            "smoothing_spread",
            "mismatch_scales",
            "w0_scales",
        ],
    ),
    ("decompose", &["scales"]),
];

struct Reader<'a> {
    ini: &'a Ini,
}

impl<'a> Reader<'a> {
    fn line(&self, section: &str, key: &str) -> Option<usize> {
        self.ini.get(section, key).map(|e| e.line)
    }

    fn fail(&self, section: &str, key: &str, msg: impl std::fmt::Display) -> ConfigError {
        let message = format!("[{section}] {key}: {msg}");
        match self.line(section, key) {
            Some(n) => ConfigError::at(n, message),
            None => ConfigError::general(message),
        }
    }

    fn parse<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.ini.get(section, key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<T>()
                .map(Some)
                .map_err(|err| self.fail(section, key, format!("cannot parse `{}`: {err}", e.value))),
        }
    }

    fn or<T: FromStr>(&self, section: &str, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.parse(section, key)?.unwrap_or(default))
    }

    fn list<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<Vec<T>>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        let Some(e) = self.ini.get(section, key) else {
            return Ok(None);
        };
        e.value
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<T>()
                    .map_err(|err| self.fail(section, key, format!("cannot parse `{s}`: {err}")))
            })
            .collect::<Result<Vec<T>, _>>()
            .map(Some)
    }

    fn bool(&self, section: &str, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.ini.get(section, key).map(|e| e.value.as_str()) {
            None => Ok(default),
            Some("true" | "yes" | "1") => Ok(true),
            Some("false" | "no" | "0") => Ok(false),
            Some(v) => Err(self.fail(section, key, format!("`{v}` is not a boolean"))),
        }
    }
}

impl RunConfig {
    pub fn from_text(text: &str) -> Result<RunConfig, ConfigError> {
        let ini = Ini::parse(text)?;
        for (name, table) in ini.sections() {
            let Some((_, keys)) = KNOWN.iter().find(|(s, _)| *s == name) else {
                let line = ini.header_line(name).unwrap_or(1);
                return Err(ConfigError::at(line, format!("unknown section [{name}]")));
            };
            for (key, entry) in table {
                if !keys.contains(&key.as_str()) {
                    return Err(ConfigError::at(entry.line, format!("unknown key `{key}` in [{name}]")));
                }
            }
        }
        let r = Reader { ini: &ini };
        let digest = hex::encode(Sha256::digest(ini.canonical().as_bytes()));

        let experiment = r
            .parse::<String>("run", "experiment")?
            .map(|s| s.parse::<Experiment>().map_err(|e| r.fail("run", "experiment", e)))
            .transpose()?;
        let output_dir = PathBuf::from(r.or("run", "output_dir", "heatlab-out".to_string())?);
        let emit_plots = r.bool("run", "emit_plots", false)?;

        let dim: usize = r.or("grid", "dim", 2)?;
        let period: f64 = r.or("grid", "period", 32.0)?;
        let points: usize = r.or("grid", "points", 128)?;
        let grid = Grid::new(dim, period, points).map_err(|e| {
            let key = match &e {
                heatlab_core::Error::InvalidParameter { what, .. } if what.starts_with("points") => "points",
                heatlab_core::Error::InvalidParameter { what, .. } if *what == "period" => "period",
                _ => "dim",
            };
            r.fail("grid", key, e)
        })?;

        let gamma0: f64 = r.or("data", "gamma0", 0.2)?;
        let band = match (r.parse::<f64>("data", "band_lo")?, r.parse::<f64>("data", "band_hi")?) {
            (None, None) => None,
            (Some(lo), Some(hi)) => Some((lo, hi)),
            _ => return Err(r.fail("data", "band_lo", "band_lo and band_hi go together")),
        };
        let kind = match r.or("data", "kind", "rough".to_string())?.as_str() {
            "rough" => DataKind::Rough,
            "gaussian" => DataKind::Gaussian {
                width: r.or("data", "width", 1.0)?,
            },
            "annular" => DataKind::Annular {
                r_in: r.or("data", "r_in", 1.0)?,
                r_out: r.or("data", "r_out", 2.0)?,
            },
            other => return Err(r.fail("data", "kind", format!("unknown data kind `{other}`"))),
        };
        let data = DataConfig {
            kind,
            gamma0,
            amplitude: r.or("data", "amplitude", 1.0)?,
            epsilon0: r.or("data", "epsilon0", 0.01)?,
            band,
        };

        let mu: f64 = r.or("solver", "mu", -1.0)?;
        let coupling = Coupling::from_mu(mu).map_err(|e| r.fail("solver", "mu", e))?;
        let t_end: f64 = r.or("solver", "t_end", 10.0)?;
        let dt_policy = match r.or("solver", "dt", "geometric".to_string())?.as_str() {
            "geometric" => {
                let DtPolicy::Geometric { dt0, ratio, dt_max } = DtPolicy::default() else {
                    unreachable!()
                };
                DtPolicy::Geometric {
                    dt0: r.or("solver", "dt0", dt0)?,
                    ratio: r.or("solver", "ratio", ratio)?,
                    dt_max: r.or("solver", "dt_max", dt_max)?,
                }
            }
            "fixed" => DtPolicy::Fixed(r.or("solver", "dt0", 1e-3)?),
            other => return Err(r.fail("solver", "dt", format!("`{other}` is neither geometric nor fixed"))),
        };
        let samples: usize = r.or("solver", "samples", DEFAULT_SAMPLE_COUNT)?;
        let solver = SolverConfig {
            coupling,
            t_end,
            dt_policy,
            sample_times: default_sample_times(t_end, samples),
            record_snapshots: r.bool("solver", "record_snapshots", false)?,
            blowup_threshold: r.or("solver", "blowup_threshold", DEFAULT_BLOWUP_THRESHOLD)?,
        };
        solver.validate().map_err(|e| r.fail("solver", "t_end", e))?;
        let fit_window = (
            r.or("solver", "fit_lo", t_end.min(10.0) / 10.0)?,
            r.or("solver", "fit_hi", t_end)?,
        );

        let schedule = match r.or("schedule", "kind", "none".to_string())?.as_str() {
            "none" => CutoffSchedule::None,
            "sqrt" => CutoffSchedule::Sqrt {
                alpha: r.or("schedule", "alpha", 0.05)?,
            },
            other => return Err(r.fail("schedule", "kind", format!("unknown schedule `{other}`"))),
        };

        let mut seeds = match r.list::<u64>("ensemble", "seeds")? {
            Some(s) if !s.is_empty() => s,
            Some(_) => return Err(r.fail("ensemble", "seeds", "empty seed list")),
            None => {
                let count: u64 = r.or("ensemble", "count", 1)?;
                let base: u64 = r.or("ensemble", "base_seed", 0)?;
                if count == 0 {
                    return Err(r.fail("ensemble", "count", "must be at least 1"));
                }
                (base..base + count).collect()
            }
        };
        seeds.sort_unstable();
        seeds.dedup();

        let sweep = SweepConfig {
            gammas: r.list("sweep", "gamma0")?.unwrap_or_else(|| vec![gamma0]),
            focusing: r.bool("sweep", "focusing", false)?,
            focusing_amplitude: r.or("sweep", "focusing_amplitude", 1e-2)?,
            window: (
                r.or("sweep", "fit_lo", fit_window.0)?,
                r.or("sweep", "fit_hi", fit_window.1)?,
            ),
            tolerance: r.or("sweep", "tolerance", 0.05)?,
            zero_tolerance: r.or("sweep", "zero_tolerance", 0.03)?,
            min_r_squared: r.or("sweep", "min_r_squared", 0.95)?,
        };
        let verify = VerifyConfig {
            horizon: r.or("verify", "horizon", 10.0)?,
            bernstein_spread: r.or("verify", "bernstein_spread", 10.0)?,
            mismatch_slope: r.or("verify", "mismatch_slope", -0.8)?,
            w0_slope_margin: r.or("verify", "w0_slope_margin", 0.1)?,
            v0_control: r.or("verify", "v0_control", 5.0)?,
            radial_spread: r.or("verify", "radial_spread", 10.0)?,
            strichartz_spread: r.or("verify", "strichartz_spread", 10.0)?,
            duhamel_spread: r.or("verify", "duhamel_spread", 10.0)?,
            smoothing_spread: r.or("verify", "smoothing_spread", 10.0)?,
            mismatch_scales: r.list("verify", "mismatch_scales")?.unwrap_or_else(|| vec![4.0, 8.0, 16.0, 32.0, 64.0]),
            w0_scales: r.list("verify", "w0_scales")?.unwrap_or_else(|| vec![2.0, 4.0, 8.0, 16.0, 32.0, 64.0]),
        };
        let decompose = DecomposeConfig {
            scales: r.list("decompose", "scales")?.unwrap_or_else(|| vec![0.5, 1.0, 2.0, 4.0]),
        };

        let cfg = RunConfig {
            experiment,
            grid,
            data,
            solver,
            schedule,
            fit_window,
            seeds,
            output_dir,
            emit_plots,
            sweep,
            verify,
            decompose,
            digest,
        };
        cfg.validate(&r)?;
        Ok(cfg)
    }

    fn validate(&self, r: &Reader) -> Result<(), ConfigError> {
        if self.data.kind == DataKind::Rough {
            validate_gamma0(self.data.gamma0, self.grid.dim()).map_err(|e| r.fail("data", "gamma0", e))?;
            self.data
                .rough_spec(&self.grid, 0)
                .validate(&self.grid)
                .map_err(|e| r.fail("data", "amplitude", e))?;
        } else if !(self.data.amplitude.is_finite()) {
            return Err(r.fail("data", "amplitude", "must be finite"));
        }
        for &g in &self.sweep.gammas {
            validate_gamma0(g, self.grid.dim()).map_err(|e| r.fail("sweep", "gamma0", e))?;
        }
        self.schedule
            .validate(Some(self.data.gamma0))
            .map_err(|e| r.fail("schedule", "alpha", e))?;
        if !(self.fit_window.0 > 0.0 && self.fit_window.0 < self.fit_window.1) {
            return Err(r.fail("solver", "fit_lo", "fit window must satisfy 0 < fit_lo < fit_hi"));
        }
        if let Some(s) = self.decompose.scales.iter().find(|&&s| !(s > 0.0 && s <= 2.0 * self.grid.k_max())) {
            return Err(r.fail("decompose", "scales", format!("N = {s} outside (0, 2 k_max]")));
        }
        for (key, scales) in [("mismatch_scales", &self.verify.mismatch_scales), ("w0_scales", &self.verify.w0_scales)] {
            if scales.len() < 2 {
                return Err(r.fail("verify", key, "a slope needs at least two scales"));
            }
            if let Some(s) = scales.iter().find(|&&s| !(s > 0.0)) {
                return Err(r.fail("verify", key, format!("N = {s} is not positive")));
            }
        }
        if !(self.verify.horizon > 0.0) {
            return Err(r.fail("verify", "horizon", "must be positive"));
        }
        Ok(())
    }
}
