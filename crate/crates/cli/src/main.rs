//! Reproducible experiment driver: dataset generation, training, evaluation
//! and full preset pipelines, configured by sectioned key/value files plus a
//! handful of flags. Every command is a pure function of (config, seed,
//! input files); reruns write byte-identical outputs.

mod commands;

use anyhow::Result;
use clap::{Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "geomrep",
    about = "Learn geometric agent/object representations from interaction data",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a transition-triple dataset from a world config.
    Generate {
        /// Experiment config file (needs [world] and [experiment]).
        #[arg(long)]
        config: PathBuf,
        /// Output directory (default: geomrep-out/dataset).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the experiment seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the emission map: identity|scrambled|raster|raster-bg|raster-aniso.
        #[arg(long)]
        emission: Option<String>,
    },
    /// Train the encoder triple on a generated dataset.
    Train {
        /// Experiment config file (needs [train]).
        #[arg(long)]
        config: PathBuf,
        /// Dataset directory written by `generate`.
        #[arg(long)]
        dataset: PathBuf,
        /// Output directory (default: geomrep-out).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the training seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the loss mode: deterministic|stochastic.
        #[arg(long)]
        mode: Option<String>,
    },
    /// Evaluate a checkpoint against a dataset (with truth when available).
    Eval {
        /// Checkpoint stem (the path passed to train's output, without
        /// .meta/.bin).
        #[arg(long)]
        checkpoint: PathBuf,
        /// Dataset directory to evaluate on.
        #[arg(long)]
        dataset: PathBuf,
        /// Output directory (default: geomrep-out).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a named preset end to end: generate → train → eval → summary.
    Reproduce {
        /// Preset name: sprites | sprites-background | sprites-anisotropic.
        name: String,
        /// Output directory (default: runs/<name>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the experiment seed (propagates to all stages).
        #[arg(long)]
        seed: Option<u64>,
        /// Override the emission map.
        #[arg(long)]
        emission: Option<String>,
        /// Override the loss mode.
        #[arg(long)]
        mode: Option<String>,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Generate {
            config,
            out,
            seed,
            emission,
        } => commands::generate(&config, out, seed, emission.as_deref()),
        Command::Train {
            config,
            dataset,
            out,
            seed,
            mode,
        } => commands::train(&config, &dataset, out, seed, mode.as_deref()),
        Command::Eval {
            checkpoint,
            dataset,
            out,
        } => commands::eval(&checkpoint, &dataset, out),
        Command::Reproduce {
            name,
            out,
            seed,
            emission,
            mode,
        } => commands::reproduce(&name, out, seed, emission.as_deref(), mode.as_deref()),
    }
}
