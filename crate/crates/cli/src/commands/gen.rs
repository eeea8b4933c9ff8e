//! `osid gen` — synthesize a Gaussian-blob feature table.

use std::path::PathBuf;

use anyhow::Context;
use osid::dataset::{gen_synthetic, save_probes, ProbeSet, SynthConfig};

use crate::Global;

#[derive(clap::Args)]
pub struct GenArgs {
    /// Number of enrolled subjects
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(2..))]
    subjects: u64,

    /// Samples per subject
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    samples: u64,

    /// Extra single-sample distractor subjects appended after the regulars
    #[arg(long, default_value_t = 0)]
    distractors: u64,

    /// Feature dimension
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u64).range(1..))]
    dim: u64,

    /// Within-subject standard deviation
    #[arg(long, default_value_t = 0.5)]
    within: f64,

    /// Between-subject (center) standard deviation
    #[arg(long, default_value_t = 10.0)]
    between: f64,

    /// Output feature table
    #[arg(short, long)]
    output: PathBuf,
}

pub fn run(global: &Global, args: &GenArgs) -> anyhow::Result<()> {
    let records = gen_synthetic::<f64>(&SynthConfig {
        num_subjects: args.subjects as usize,
        samples_per_subject: args.samples as usize,
        distractors: args.distractors as usize,
        dim: args.dim as usize,
        within_spread: args.within,
        between_spread: args.between,
        seed: global.seed,
    })?;
    let count = records.len();
    let table = ProbeSet::from_records(records)?;
    if let Some(parent) = args.output.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| {
            format!("cannot create output directory {}", parent.display())
        })?;
    }
    let format = super::table_format(&args.output, global);
    save_probes(&args.output, format, &table)?;
    println!("wrote {count} feature rows to {}", args.output.display());
    Ok(())
}
