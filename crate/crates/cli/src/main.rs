use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use heatlab_cli::{run, Experiment, Options, EXIT_FAILURE};

#[derive(Parser)]
#[command(name = "heatlab", version, about = "Mass-critical heat flow experiments on the periodic box")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the configured data and write trajectories.
    Simulate(Common),
    /// Run the estimate suites over the ensemble.
    Verify(Common),
    /// Fit decay slopes over a list of gamma0 values.
    DecaySweep(Common),
    /// Tabulate the high/low split of the initial data.
    Decompose(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Ensemble workers; HEATLAB_THREADS caps this.
    #[arg(long)]
    jobs: Option<usize>,
    /// Overrides `[run] output_dir`.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    plots: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, common) = match cli.command {
        Command::Simulate(c) => (Experiment::Simulate, c),
        Command::Verify(c) => (Experiment::Verify, c),
        Command::DecaySweep(c) => (Experiment::DecaySweep, c),
        Command::Decompose(c) => (Experiment::Decompose, c),
    };
    let opts = Options {
        jobs: common.jobs,
        output: common.output,
        plots: common.plots,
    };
    let code = match run(experiment, &common.config, &opts) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("heatlab: {e}");
            EXIT_FAILURE
        }
    };
    ExitCode::from(code as u8)
}
