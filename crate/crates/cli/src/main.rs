//! `panoptic`: synthesize scenes, build targets, fuse predictions, evaluate,
//! render and benchmark.
//!
//! Exit codes: 0 success, 2 missing input, 3 malformed input, 4 internal
//! invariant violation. `PANOPTIC_THREADS` caps the worker threads (0 or
//! unset: one per core).

mod cmd;
mod config;
mod error;
mod files;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::{CliError, CliResult};

#[derive(Parser, Debug)]
#[command(name = "panoptic", version, about = "Keypoint-based panoptic parsing toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    Synth(cmd::synth::SynthArgs),
    Targets(cmd::targets::TargetsArgs),
    Fuse(cmd::fuse::FuseArgs),
    Eval(cmd::eval::EvalArgs),
    Render(cmd::render::RenderArgs),
    Bench(cmd::bench::BenchArgs),
}

fn init_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("PANOPTIC_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .map_err(|e| CliError::Malformed(format!("PANOPTIC_THREADS={value:?}: {e}")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Internal(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: &Cli) -> CliResult<()> {
    init_threads()?;
    match &cli.command {
        Command::Synth(a) => cmd::synth::run(a),
        Command::Targets(a) => cmd::targets::run(a),
        Command::Fuse(a) => cmd::fuse::run(a),
        Command::Eval(a) => cmd::eval::run(a),
        Command::Render(a) => cmd::render::run(a),
        Command::Bench(a) => cmd::bench::run(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match std::panic::catch_unwind(|| run(&cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        // The panic hook has already printed the message.
        Err(_) => ExitCode::from(4),
    }
}
