//! `osid split` — partition a feature table into gallery and probe sets.

use std::path::PathBuf;

use osid::dataset::{
    atomic_write, load_probes, save_gallery, save_probes, split_protocol, Gallery,
    ProbeSet, ProtocolConfig, ProtocolStyle,
};

use crate::Global;

#[derive(clap::Args)]
pub struct SplitArgs {
    /// Input feature table
    #[arg(short, long)]
    input: PathBuf,

    /// Partitioning style: rowden | gunther | openness
    #[arg(long, default_value = "rowden")]
    style: ProtocolStyle,

    /// Minimum training samples for a subject to enroll
    #[arg(long, default_value_t = 2)]
    min_train: usize,

    /// Probe samples withheld per enrolled subject
    #[arg(long, default_value_t = 1)]
    probes_per_known: usize,

    /// Cap on training samples kept per subject
    #[arg(long)]
    cap: Option<usize>,

    /// Target unknown share of the probe set (openness style only)
    #[arg(long, default_value_t = 0.5)]
    openness: f64,
}

/// Everything the split depended on, plus what it produced.
#[derive(serde::Serialize)]
struct SplitMeta<'a> {
    command: &'a str,
    input: &'a PathBuf,
    style: String,
    min_train: usize,
    probes_per_known: usize,
    cap: Option<usize>,
    openness: f64,
    seed: u64,
    counts: osid::dataset::SplitCounts,
}

pub fn run(global: &Global, args: &SplitArgs) -> anyhow::Result<()> {
    let format = super::table_format(&args.input, global);
    let table: ProbeSet<f64> = load_probes(&args.input, format)?;
    let config = ProtocolConfig {
        style: args.style,
        min_train: args.min_train,
        probes_per_known: args.probes_per_known,
        cap: args.cap,
        openness: args.openness,
        seed: global.seed,
    };
    let split = split_protocol(table.to_records(), &config)?;

    let ext = global.format.extension();
    let train_path = super::out_path(global, &format!("train.{ext}"))?;
    let probes_path = super::out_path(global, &format!("probes.{ext}"))?;
    let meta_path = super::out_path(global, "split_meta.json")?;

    let counts = split.counts;
    save_gallery(
        &train_path,
        global.format,
        &Gallery::from_records(split.train)?,
    )?;
    save_probes(
        &probes_path,
        global.format,
        &ProbeSet::from_records(split.probes)?,
    )?;
    let meta = SplitMeta {
        command: "split",
        input: &args.input,
        style: args.style.to_string(),
        min_train: args.min_train,
        probes_per_known: args.probes_per_known,
        cap: args.cap,
        openness: args.openness,
        seed: global.seed,
        counts,
    };
    atomic_write(&meta_path, |out| {
        serde_json::to_writer_pretty(&mut *out, &meta)?;
        use std::io::Write;
        out.write_all(b"\n")?;
        Ok(())
    })?;

    println!(
        "{} known subjects ({} train samples), {} known + {} unknown probes -> {}",
        counts.known_subjects,
        counts.train_samples,
        counts.known_probes,
        counts.unknown_probes,
        global.out_dir.display()
    );
    Ok(())
}
