//! `osid evaluate` — score identification results into a report and curves.
//!
//! Consumes the `results.jsonl` written by `osid identify` (full rankings)
//! and produces `report.json`, `cmc.csv`, and `roc.csv` in `--out-dir`. The
//! run metadata found beside the results file (or passed via `--meta`) is
//! echoed verbatim into the report for reproducibility.

use std::io::BufRead;
use std::path::PathBuf;

use anyhow::Context;
use osid::metrics::{evaluate, ProbeResult};

use crate::Global;

#[derive(clap::Args)]
pub struct EvaluateArgs {
    /// Per-probe results file (results.jsonl from `osid identify`)
    #[arg(long)]
    results: PathBuf,

    /// Run metadata to echo into the report (defaults to run_meta.json
    /// beside the results file, when present)
    #[arg(long)]
    meta: Option<PathBuf>,

    /// Deepest CMC rank reported
    #[arg(long, default_value_t = 20)]
    max_rank: usize,

    /// FAR operating points for DIR lookup
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.1")]
    dir_at_far: Vec<f64>,
}

fn load_results(path: &PathBuf) -> anyhow::Result<Vec<ProbeResult<f64>>> {
    let file = std::fs::File::open(path)
        .with_context(|| format!("cannot open results {}", path.display()))?;
    let mut results = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let result: ProbeResult<f64> = serde_json::from_str(&line)
            .with_context(|| format!("{}:{}", path.display(), i + 1))?;
        results.push(result);
    }
    Ok(results)
}

pub fn run(global: &Global, args: &EvaluateArgs) -> anyhow::Result<()> {
    let results = load_results(&args.results)?;

    let meta_path = args.meta.clone().or_else(|| {
        let sibling = args.results.with_file_name("run_meta.json");
        sibling.exists().then_some(sibling)
    });
    let meta: serde_json::Value = match &meta_path {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read metadata {}", path.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing metadata {}", path.display()))?
        }
        None => serde_json::Value::Null,
    };
    let marr = meta.get("marr").and_then(|v| v.as_f64());

    let report = evaluate(&results, args.max_rank, &args.dir_at_far, marr, meta)?;

    report.save_json(&super::out_path(global, "report.json")?)?;
    report.save_cmc_csv(&super::out_path(global, "cmc.csv")?)?;
    report.save_roc_csv(&super::out_path(global, "roc.csv")?)?;

    let rank1 = report.cmc.first().map(|(_, a)| *a).unwrap_or(0.0);
    let mut summary = format!(
        "{} known + {} unknown probes: rank-1 {:.4}, auc {:.4}",
        report.num_known_probes, report.num_unknown_probes, rank1, report.auc
    );
    for (target, dir) in &report.dir_at_far {
        summary.push_str(&format!(", dir@{target} {dir:.4}"));
    }
    println!("{summary} -> {}", global.out_dir.display());
    Ok(())
}
