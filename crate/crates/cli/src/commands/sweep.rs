//! `osid sweep` — grid ensemble parameters over seeded repetitions.
//!
//! Per seed, a fresh synthetic benchmark is drawn (one held-out probe per
//! subject), clustered once, and every (models, components, k) grid cell is
//! scored on it. `sweep.csv` reports per-cell mean and standard deviation of
//! the Rank-1/5/10 accuracies across seeds.

use std::path::PathBuf;

use anyhow::bail;
use osid::apclust::{cluster_centroids, ClusterParams};
use osid::dataset::{atomic_write, gen_synthetic, FeatureVector, Gallery, SynthConfig};
use osid::ensemble::EnsembleCache;
use osid::metrics::ProbeResult;
use osid::openset::{identify, PipelineConfig};

use crate::Global;

#[derive(clap::Args)]
pub struct SweepArgs {
    /// Ensemble sizes to test
    #[arg(long, value_delimiter = ',', default_value = "60")]
    models: Vec<usize>,

    /// Component counts to test
    #[arg(long, value_delimiter = ',', default_value = "10")]
    components: Vec<usize>,

    /// Top-cluster counts to test
    #[arg(long, value_delimiter = ',', default_value = "20")]
    k: Vec<usize>,

    /// Seeds; each is one full repetition (data + training)
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    seeds: Vec<u64>,

    /// Benchmark: enrolled subjects
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(2..))]
    subjects: u64,

    /// Benchmark: training samples per subject (one extra is held out as probe)
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    samples: u64,

    /// Benchmark: feature dimension
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u64).range(1..))]
    dim: u64,

    /// Benchmark: within-subject standard deviation
    #[arg(long, default_value_t = 0.5)]
    within: f64,

    /// Benchmark: between-subject standard deviation
    #[arg(long, default_value_t = 10.0)]
    between: f64,

    /// Output CSV (defaults to sweep.csv in --out-dir)
    #[arg(short, long)]
    output: Option<PathBuf>,
}

/// Per-seed benchmark: gallery plus one held-out probe per subject.
struct Benchmark {
    train: Gallery<f64>,
    probes: Vec<FeatureVector<f64>>,
}

fn make_benchmark(args: &SweepArgs, seed: u64) -> anyhow::Result<Benchmark> {
    let records = gen_synthetic::<f64>(&SynthConfig {
        num_subjects: args.subjects as usize,
        samples_per_subject: args.samples as usize + 1,
        distractors: 0,
        dim: args.dim as usize,
        within_spread: args.within,
        between_spread: args.between,
        seed,
    })?;
    let full = Gallery::from_records(records)?;
    let mut train = Vec::new();
    let mut probes = Vec::new();
    for (_, samples) in full.iter() {
        let (held_out, kept) = samples.split_last().expect("samples_per_subject >= 2");
        train.extend(kept.iter().cloned());
        probes.push(held_out.clone());
    }
    Ok(Benchmark {
        train: Gallery::from_records(train)?,
        probes,
    })
}

/// Rank-1/5/10 hit fractions of one repetition.
fn score_cell(
    bench: &Benchmark,
    clustering: &osid::apclust::Clustering<f64>,
    cache: &EnsembleCache<f64>,
    config: &PipelineConfig<f64>,
) -> anyhow::Result<[f64; 3]> {
    let mut hits = [0usize; 3];
    for probe in &bench.probes {
        let decision = identify(&bench.train, clustering, probe, config, cache)?;
        let rank = ProbeResult::from_decision(probe, &decision)
            .rank_of_true()
            .unwrap_or(usize::MAX);
        for (slot, cutoff) in [1usize, 5, 10].into_iter().enumerate() {
            if rank <= cutoff {
                hits[slot] += 1;
            }
        }
    }
    let n = bench.probes.len() as f64;
    Ok([
        hits[0] as f64 / n,
        hits[1] as f64 / n,
        hits[2] as f64 / n,
    ])
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// One (models, components, k) grid cell with its per-seed [rank1, rank5,
/// rank10] accuracies.
type GridCell = ((usize, usize, usize), Vec<[f64; 3]>);

pub fn run(global: &Global, args: &SweepArgs) -> anyhow::Result<()> {
    if args.models.is_empty()
        || args.components.is_empty()
        || args.k.is_empty()
        || args.seeds.is_empty()
    {
        bail!("empty sweep grid: models, components, k, and seeds all need at least one value");
    }

    let mut cells: Vec<GridCell> = Vec::new();
    for &d in &args.models {
        for &c in &args.components {
            for &k in &args.k {
                cells.push(((d, c, k), Vec::with_capacity(args.seeds.len())));
            }
        }
    }

    for &seed in &args.seeds {
        let bench = make_benchmark(args, seed)?;
        let params = ClusterParams {
            metric: global.metric,
            l2_normalized: false,
            ..ClusterParams::default()
        };
        let clustering = cluster_centroids(bench.train.centroids(), &params)?;
        let cache = EnsembleCache::new();
        for ((d, c, k), scores) in cells.iter_mut() {
            let config = PipelineConfig {
                k: *k,
                d: *d,
                components: *c,
                threshold: 0.0,
                train_seed: seed,
                tol: 1e-12,
            };
            scores.push(score_cell(&bench, &clustering, &cache, &config)?);
        }
    }

    let output = super::explicit_or_out(global, args.output.as_ref(), "sweep.csv")?;
    atomic_write(&output, |out| {
        use std::io::Write;
        writeln!(
            out,
            "models,components,k,rank1_mean,rank1_std,rank5_mean,rank5_std,rank10_mean,rank10_std"
        )?;
        for ((d, c, k), scores) in &cells {
            let columns: Vec<(f64, f64)> = (0..3)
                .map(|slot| {
                    let per_seed: Vec<f64> = scores.iter().map(|s| s[slot]).collect();
                    mean_std(&per_seed)
                })
                .collect();
            writeln!(
                out,
                "{d},{c},{k},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}",
                columns[0].0,
                columns[0].1,
                columns[1].0,
                columns[1].1,
                columns[2].0,
                columns[2].1
            )?;
        }
        Ok(())
    })?;

    println!(
        "{} cells x {} seeds -> {}",
        cells.len(),
        args.seeds.len(),
        output.display()
    );
    Ok(())
}
