//! `osid identify` — decide known/unknown for every probe.
//!
//! Writes three artifacts into `--out-dir`:
//! - `decisions.jsonl`: one compact decision per probe (outcome, top
//!   candidates, ratio),
//! - `results.jsonl`: full-ranking per-probe results consumed by
//!   `osid evaluate`,
//! - `run_meta.json`: the resolved configuration plus run summaries.

use std::path::PathBuf;

use anyhow::{bail, Context};
use osid::apclust::Clustering;
use osid::dataset::{atomic_write, load_gallery, load_probes, Gallery, ProbeSet};
use osid::ensemble::EnsembleCache;
use osid::metrics::ProbeResult;
use osid::openset::{
    identify, identify_no_cluster, ratio_serde, Outcome, PipelineConfig,
};

use crate::Global;

#[derive(clap::Args)]
pub struct IdentifyArgs {
    /// Gallery (training) feature table
    #[arg(long)]
    train: PathBuf,

    /// Probe feature table
    #[arg(long)]
    probes: PathBuf,

    /// Clustering artifact from `osid cluster`
    #[arg(long, required_unless_present = "no_cluster", conflicts_with = "no_cluster")]
    clusters: Option<PathBuf>,

    /// Acceptance threshold on the detection ratio
    #[arg(long)]
    threshold: f64,

    /// Clusters pooled per probe
    #[arg(long, default_value_t = 20)]
    k: usize,

    /// Ensemble size (number of binary models)
    #[arg(long, default_value_t = 60)]
    models: usize,

    /// Latent PLS components per model
    #[arg(long, default_value_t = 10)]
    components: usize,

    /// PLS early-stop tolerance
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,

    /// Rank every probe against the whole gallery (no cluster selection)
    #[arg(long)]
    no_cluster: bool,

    /// Candidates listed per decision
    #[arg(long, default_value_t = 10)]
    top: usize,
}

/// One `decisions.jsonl` line.
#[derive(serde::Serialize)]
struct DecisionRow<'a> {
    sample_id: &'a str,
    outcome: &'a Outcome,
    top_candidates: &'a [(String, f64)],
    #[serde(with = "ratio_serde")]
    ratio: f64,
}

/// The `run_meta.json` schema: resolved configuration plus run summaries.
#[derive(serde::Serialize)]
struct RunMeta<'a> {
    command: &'a str,
    train: &'a PathBuf,
    probes: &'a PathBuf,
    clusters: Option<&'a PathBuf>,
    no_cluster: bool,
    metric: String,
    l2_normalize: bool,
    seed: u64,
    k: usize,
    models: usize,
    components: usize,
    #[serde(with = "ratio_serde")]
    threshold: f64,
    tol: f64,
    top: usize,
    num_probes: usize,
    known_decisions: usize,
    unknown_decisions: usize,
    degenerate_probes: usize,
    ensembles_trained: usize,
    /// Fraction of known probes whose subject survives cluster selection
    /// (absent when clustering is bypassed or no known probes exist).
    marr: Option<f64>,
}

pub fn run(global: &Global, args: &IdentifyArgs) -> anyhow::Result<()> {
    let mut train: Gallery<f64> =
        load_gallery(&args.train, super::table_format(&args.train, global))?;
    let mut probes: ProbeSet<f64> =
        load_probes(&args.probes, super::table_format(&args.probes, global))?;
    if global.l2_normalize {
        train.l2_normalize();
        probes.l2_normalize();
    }

    let clustering: Option<Clustering<f64>> = match &args.clusters {
        Some(path) => {
            let clustering = Clustering::load(path)
                .with_context(|| format!("loading clustering {}", path.display()))?;
            if clustering.params.l2_normalized != global.l2_normalize {
                bail!(
                    "clustering artifact was built with l2_normalize={} but this run uses {}",
                    clustering.params.l2_normalized,
                    global.l2_normalize
                );
            }
            let mut clustered = clustering.points.subject_ids.clone();
            clustered.sort_unstable();
            if clustered != train.subject_ids() {
                bail!(
                    "clustering artifact covers {} subjects that do not match the gallery",
                    clustered.len()
                );
            }
            Some(clustering)
        }
        None => None,
    };

    let config = PipelineConfig {
        k: args.k,
        d: args.models,
        components: args.components,
        threshold: args.threshold,
        train_seed: global.seed,
        tol: args.tol,
    };
    let cache = EnsembleCache::new();

    let mut rows = Vec::with_capacity(probes.len());
    let mut results = Vec::with_capacity(probes.len());
    let mut known_decisions = 0usize;
    let mut degenerate = 0usize;
    for probe in probes.iter() {
        let decision = match &clustering {
            Some(clustering) => identify(&train, clustering, probe, &config, &cache)?,
            None => identify_no_cluster(&train, probe, &config, &cache)?,
        };
        if matches!(decision.outcome, Outcome::Known(_)) {
            known_decisions += 1;
        }
        if decision.degenerate_candidates {
            degenerate += 1;
        }
        results.push(ProbeResult::from_decision(probe, &decision));
        rows.push(decision);
    }

    let decisions_path = super::out_path(global, "decisions.jsonl")?;
    atomic_write(&decisions_path, |out| {
        use std::io::Write;
        for (probe, decision) in probes.iter().zip(&rows) {
            let row = DecisionRow {
                sample_id: &probe.sample_id,
                outcome: &decision.outcome,
                top_candidates: &decision.ranking
                    [..args.top.min(decision.ranking.len())],
                ratio: decision.ratio,
            };
            serde_json::to_writer(&mut *out, &row)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    })?;

    let results_path = super::out_path(global, "results.jsonl")?;
    atomic_write(&results_path, |out| {
        use std::io::Write;
        for result in &results {
            serde_json::to_writer(&mut *out, result)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    })?;

    let marr = match &clustering {
        Some(clustering) => {
            let knowns: Vec<_> =
                probes.iter().filter(|p| !p.is_unknown()).cloned().collect();
            if knowns.is_empty() {
                None
            } else {
                Some(clustering.marr(&ProbeSet::from_records(knowns)?, args.k)?)
            }
        }
        None => None,
    };
    let meta = RunMeta {
        command: "identify",
        train: &args.train,
        probes: &args.probes,
        clusters: args.clusters.as_ref(),
        no_cluster: args.no_cluster,
        metric: global.metric.to_string(),
        l2_normalize: global.l2_normalize,
        seed: global.seed,
        k: args.k,
        models: args.models,
        components: args.components,
        threshold: args.threshold,
        tol: args.tol,
        top: args.top,
        num_probes: probes.len(),
        known_decisions,
        unknown_decisions: probes.len() - known_decisions,
        degenerate_probes: degenerate,
        ensembles_trained: cache.len(),
        marr,
    };
    let meta_path = super::out_path(global, "run_meta.json")?;
    atomic_write(&meta_path, |out| {
        serde_json::to_writer_pretty(&mut *out, &meta)?;
        use std::io::Write;
        out.write_all(b"\n")?;
        Ok(())
    })?;

    println!(
        "{} probes: {} known, {} unknown ({} ensembles trained) -> {}",
        probes.len(),
        known_decisions,
        probes.len() - known_decisions,
        cache.len(),
        global.out_dir.display()
    );
    Ok(())
}
