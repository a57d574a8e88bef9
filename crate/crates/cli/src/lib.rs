//! Command-line front end for heatlab: config parsing, experiment
//! orchestration, artifacts and plots.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod ini;
pub mod plot;
pub mod pool;

pub use commands::{run, CliError, Options, EXIT_BLOWUP, EXIT_FAILURE, EXIT_OK};
pub use config::{Experiment, RunConfig};
