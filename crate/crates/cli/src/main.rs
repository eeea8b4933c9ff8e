//! `osid` — the open-set identification pipeline as a command line.
//!
//! Subcommands cover the full workflow: `gen` synthesizes feature tables,
//! `split` partitions them into gallery and probes, `cluster` builds the
//! offline clustering artifact, `identify` decides known/unknown per probe,
//! `evaluate` scores the decisions, and `sweep` grids ensemble parameters
//! over seeded repetitions. Every command exits zero on success and prints a
//! single-line diagnostic on failure; all randomness flows from `--seed`.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use osid::apclust::Metric;
use osid::dataset::FileFormat;

#[derive(Parser)]
#[command(
    name = "osid",
    version,
    about = "Open-set identification over precomputed feature vectors"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand.
#[derive(Args)]
struct Global {
    /// Base random seed for every stochastic step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Directory receiving output artifacts.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,

    /// Feature-table format; `.csv`/`.jsonl` file extensions override it.
    #[arg(long, global = true, default_value = "csv")]
    format: FileFormat,

    /// Similarity between centroids and probes.
    #[arg(long, global = true, default_value = "neg_sq_euclid")]
    metric: Metric,

    /// L2-normalize every feature vector after loading.
    #[arg(long, global = true)]
    l2_normalize: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic Gaussian-blob feature table
    Gen(commands::gen::GenArgs),
    /// Partition a feature table into gallery and probe sets
    Split(commands::split::SplitArgs),
    /// Cluster gallery subject centroids into a reusable artifact
    Cluster(commands::cluster::ClusterArgs),
    /// Decide known/unknown for every probe
    Identify(commands::identify::IdentifyArgs),
    /// Score identification results into a report and curve files
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Grid-sweep ensemble parameters over seeded repetitions
    Sweep(commands::sweep::SweepArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(
        env_logger::Env::default().default_filter_or("warn"),
    )
    .format_timestamp(None)
    .init();

    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(args) => commands::gen::run(&cli.global, &args),
        Command::Split(args) => commands::split::run(&cli.global, &args),
        Command::Cluster(args) => commands::cluster::run(&cli.global, &args),
        Command::Identify(args) => commands::identify::run(&cli.global, &args),
        Command::Evaluate(args) => commands::evaluate::run(&cli.global, &args),
        Command::Sweep(args) => commands::sweep::run(&cli.global, &args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
