//! `sapca`: sparse asymptotic PCA from the command line.

use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod estimate;
mod inspect;
mod output;
mod parse;
mod select;
mod simulate;

#[derive(Parser)]
#[command(name = "sapca", version, about = "Sparse asymptotic PCA for panels with time-sparse factors")]
struct Cli {
    /// Worker threads for replication and cross-validation grids (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate sparse factors and loadings from a CSV panel.
    Estimate(estimate::EstimateArgs),
    /// Select the number of factors or the sparsity level.
    Select(select::SelectArgs),
    /// Run Monte Carlo replications of a table design or a custom DGP.
    Simulate(simulate::SimulateArgs),
    /// Print a JSON summary of a CSV panel.
    Inspect(inspect::InspectArgs),
    /// Compare two factor matrices.
    Metric(inspect::MetricArgs),
}

/// Input and usage problems exit with 2, numerical failures with 3.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<sparse_apca::Error>() {
            return if e.is_input_error() { 2 } else { 3 };
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("sapca: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Estimate(a) => estimate::run(a),
        Command::Select(a) => select::run(a),
        Command::Simulate(a) => simulate::run(a),
        Command::Inspect(a) => inspect::run(a),
        Command::Metric(a) => inspect::run_metric(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sapca: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
