//! `wpnn`: cavity synthesis, task generation, training sweeps, analysis
//! exports and result aggregation.

mod analyze;
mod error;
mod gen_tasks;
mod report;
mod store;
mod synth;
mod train;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::CliResult;

#[derive(Parser, Debug)]
#[command(name = "wpnn", version, about = "Simulate and train wave-based physical neural networks on a programmable metasurface")]
struct Cli {
    /// Root directory for every output. Relative output paths resolve against it.
    #[arg(long, global = true, env = "WPNN_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize a passive wideband cavity and write it as a scattering JSON file.
    Synth(synth::SynthArgs),
    /// Write regression-task fixtures, one JSON file per (cut-off, seed).
    GenTasks(gen_tasks::GenTasksArgs),
    /// Run a training sweep described by a JSON experiment config.
    Train(train::TrainArgs),
    /// Export series coefficients, impulse responses or scores for a checkpoint.
    Analyze(analyze::AnalyzeArgs),
    /// Aggregate the cell records of a sweep directory into median/std summaries.
    Report(report::ReportArgs),
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Synth(a) => synth::run(&cli.out_dir, a),
        Command::GenTasks(a) => gen_tasks::run(&cli.out_dir, a),
        Command::Train(a) => train::run(&cli.out_dir, a),
        Command::Analyze(a) => analyze::run(&cli.out_dir, a),
        Command::Report(a) => report::run(&cli.out_dir, a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("wpnn: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
