//! `osid cluster` — build the offline clustering artifact from a gallery.

use std::path::PathBuf;

use osid::apclust::{cluster_centroids, ClusterParams, Preference};
use osid::dataset::{load_gallery, Gallery};

use crate::Global;

#[derive(clap::Args)]
pub struct ClusterArgs {
    /// Gallery (training) feature table
    #[arg(short, long)]
    input: PathBuf,

    /// Output artifact path (defaults to clusters.json in --out-dir)
    #[arg(short, long)]
    output: Option<PathBuf>,

    /// Exemplar preference: median | min | fixed:<value>
    #[arg(long, default_value = "median")]
    preference: Preference,

    /// Message damping factor in [0.5, 1)
    #[arg(long, default_value_t = 0.5)]
    damping: f64,

    /// Iteration cap for message passing
    #[arg(long, default_value_t = 200)]
    max_iter: usize,

    /// Consecutive stable iterations required to declare convergence
    #[arg(long, default_value_t = 15)]
    convergence_iter: usize,
}

pub fn run(global: &Global, args: &ClusterArgs) -> anyhow::Result<()> {
    let format = super::table_format(&args.input, global);
    let mut gallery: Gallery<f64> = load_gallery(&args.input, format)?;
    if global.l2_normalize {
        gallery.l2_normalize();
    }
    let params = ClusterParams {
        metric: global.metric,
        preference: args.preference,
        damping: args.damping,
        max_iter: args.max_iter,
        convergence_iter: args.convergence_iter,
        l2_normalized: global.l2_normalize,
    };
    let clustering = cluster_centroids(gallery.centroids(), &params)?;
    let output = super::explicit_or_out(global, args.output.as_ref(), "clusters.json")?;
    clustering.save(&output)?;
    println!(
        "{} subjects -> {} clusters (converged: {}, iterations: {}) -> {}",
        gallery.num_subjects(),
        clustering.num_clusters(),
        clustering.converged,
        clustering.iterations_run,
        output.display()
    );
    Ok(())
}
