//! `nsdf` — learn, synthesize, and evaluate time-evolving shape SDFs.
//!
//! Exit codes: 0 success, 1 experiment acceptance failure, 2 usage or data
//! errors.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "nsdf", version, about = "Implicit neural shape-sequence modeling")]
struct Cli {
    /// Master RNG seed; every stream derives from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores). Results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// TOML or JSON config file; flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = false)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert voxel mask sequences into normalized SDF grid caches.
    Prepare(commands::prepare::PrepareArgs),
    /// Train a model on prepared SDF grids.
    Train(commands::train_cmd::TrainArgs),
    /// Fit a latent code (and rotation) for a new sequence against a frozen
    /// decoder.
    FitLatent(commands::fit::FitArgs),
    /// Sample latent codes and export synthesized sequences.
    Synthesize(commands::synth::SynthArgs),
    /// Evaluate a trained sequence at arbitrary time points.
    Interpolate(commands::synth::InterpolateArgs),
    /// Extract OBJ meshes from cached SDF grids.
    ExportMesh(commands::mesh::ExportMeshArgs),
    /// Compare two mask-sequence sets: Dice, descriptors, KS tests.
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Run a named study; exit code reflects its acceptance block.
    Experiment(commands::experiment::ExperimentArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        // Ignore failure: the global pool may already exist under test
        // harnesses.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let ctx = commands::Ctx {
        seed: cli.seed,
        threads: cli.threads,
        verbose: cli.verbose,
        file_config: match config::load_file_config(cli.config.as_deref()) {
            Ok(v) => v,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
    };
    let result = match cli.command {
        Command::Prepare(args) => commands::prepare::run(&ctx, args),
        Command::Train(args) => commands::train_cmd::run(&ctx, args),
        Command::FitLatent(args) => commands::fit::run(&ctx, args),
        Command::Synthesize(args) => commands::synth::run(&ctx, args),
        Command::Interpolate(args) => commands::synth::run_interpolate(&ctx, args),
        Command::ExportMesh(args) => commands::mesh::run(&ctx, args),
        Command::Evaluate(args) => commands::evaluate::run(&ctx, args),
        Command::Experiment(args) => commands::experiment::run(&ctx, args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
