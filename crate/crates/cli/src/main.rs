//! `slidewin` command-line driver.
//!
//! Exit codes: 0 success, 1 tracker failure, 2 malformed input, 3 invalid
//! configuration or scenario, 4 scene mismatch, 5 unwritable output.
//! Log verbosity follows `RUST_LOG` (default `warn`).

mod bench;
mod error;
mod eval;
mod files;
mod simulate;
mod track;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "slidewin",
    version,
    about = "Sliding-window 3D multi-object tracker"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Track detections and write per-frame track records.
    Track(track::TrackArgs),
    /// Score track records against ground truth (MOTA, AMOTA).
    Eval(eval::EvalArgs),
    /// Generate a synthetic scene.
    Simulate(simulate::SimulateArgs),
    /// Compare window lengths on a synthetic scenario.
    Bench(bench::BenchArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Track(a) => track::run(a),
        Command::Eval(a) => eval::run(a),
        Command::Simulate(a) => simulate::run(a),
        Command::Bench(a) => bench::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
