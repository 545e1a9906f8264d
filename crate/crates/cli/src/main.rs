mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fairline_core::experiment::{ExperimentError, OperatorChoice};
use fairline_core::ScenarioError;

/// Fair-access and AoI models for NR V2X Mode 2, with a multi-objective
/// selection-window optimizer.
#[derive(Debug, Parser)]
#[command(name = "fairline", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact per-link AoI for a window vector.
    Aoi(EvalArgs),
    /// Per-vehicle PRR, fairness index and deviation for a window vector.
    Fairness(EvalArgs),
    /// Run the optimizer once and print the final archive and the selected windows.
    Optimize(OptimizeArgs),
    /// Optimized vs fixed-window configurations across average velocities.
    SweepVelocity(SweepArgs),
    /// Optimized vs fixed-window configurations across fleet sizes.
    SweepVehicles(SweepArgs),
    /// Per-generation normalized hypervolume for each operator.
    CompareOperators(CompareArgs),
    /// Hypervolume of an archive CSV.
    Hv(HvArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario JSON; defaults to the built-in three-vehicle highway.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Directory for CSV output; CSV goes to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated windows in ms; defaults to the baseline window for every vehicle.
    #[arg(long, value_delimiter = ',')]
    windows: Option<Vec<f64>>,
    #[arg(long, default_value_t = 100.0)]
    baseline_window: f64,
}

#[derive(Debug, Args)]
struct OptimizerArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    generations: usize,
}

#[derive(Debug, Args)]
struct OptimizeArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    optimizer: OptimizerArgs,
    #[arg(long, default_value = "mock-llm")]
    operator: OperatorChoice,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    optimizer: OptimizerArgs,
    /// Operators to run next to the baseline.
    #[arg(long, value_delimiter = ',', default_value = "mock-llm")]
    operator: Vec<OperatorChoice>,
    #[arg(long, default_value_t = 30)]
    trials: usize,
    #[arg(long, default_value_t = 100.0)]
    baseline_window: f64,
    /// Sweep values (m/s for velocity, counts for vehicles).
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    optimizer: OptimizerArgs,
    #[arg(long, value_delimiter = ',', default_value = "sbx,de,mock-llm")]
    operator: Vec<OperatorChoice>,
    #[arg(long, default_value_t = 1)]
    trials: usize,
}

#[derive(Debug, Args)]
struct HvArgs {
    /// Archive CSV; `fk*` and `fage` columns are used when present, otherwise every column.
    #[arg(long)]
    archive: PathBuf,
    /// `auto` (normalize to the archive, reference 1.1) or comma-separated raw reference values.
    #[arg(long = "ref", default_value = "auto")]
    reference: String,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Aoi(a) => commands::aoi(a),
        Command::Fairness(a) => commands::fairness(a),
        Command::Optimize(a) => commands::optimize(a),
        Command::SweepVelocity(a) => commands::sweep(a, commands::Sweep::Velocity),
        Command::SweepVehicles(a) => commands::sweep(a, commands::Sweep::Vehicles),
        Command::CompareOperators(a) => commands::compare(a),
        Command::Hv(a) => commands::hv(a),
    };
    match result {
        Ok(commands::Status::Complete) => ExitCode::SUCCESS,
        Ok(commands::Status::Partial(failed)) => {
            eprintln!("warning: {failed} sweep rows failed");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_config_error(&e) { 2 } else { 1 })
        }
    }
}

fn is_config_error(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.is::<commands::ConfigError>()
            || c.is::<ScenarioError>()
            || matches!(
                c.downcast_ref::<ExperimentError>(),
                Some(
                    ExperimentError::Scenario(_)
                        | ExperimentError::Spec(_)
                        | ExperimentError::UnknownOperator(_)
                        | ExperimentError::Llm(_)
                )
            )
    })
}
