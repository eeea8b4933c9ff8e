//! Open-set identification over precomputed feature vectors.
//!
//! The pipeline implemented here answers "who is this, if anyone?" for a
//! probe vector against a gallery of enrolled subjects:
//!
//! 1. cluster gallery subjects by their centroids (affinity propagation),
//! 2. shortlist the clusters most similar to the probe,
//! 3. score the shortlist with an ensemble of binary partial-least-squares
//!    regressors trained on random balanced subject splits,
//! 4. rank subjects by filtered vote histograms, and
//! 5. accept or reject the top candidate with a score-ratio threshold.
//!
//! [`metrics`] evaluates the resulting decisions: closed-set CMC curves and
//! the open-set DIR-vs-FAR ROC with AUC and operating-point summaries.
//!
//! Everything is generic over the feature scalar (`f32` or `f64`) via
//! [`scalar::Real`]; the `*32`/`*64` aliases below pick a concrete scalar.
//! All randomized steps take explicit seeds and iterate subjects in sorted
//! order, so equal inputs produce byte-identical outputs.

pub mod apclust;
pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod metrics;
pub mod openset;
pub mod pls;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

/// Gallery over `f32` features.
pub type Gallery32 = dataset::Gallery<f32>;
/// Gallery over `f64` features.
pub type Gallery64 = dataset::Gallery<f64>;
/// Probe set over `f32` features.
pub type ProbeSet32 = dataset::ProbeSet<f32>;
/// Probe set over `f64` features.
pub type ProbeSet64 = dataset::ProbeSet<f64>;
/// Subject clustering over `f32` features.
pub type Clustering32 = apclust::Clustering<f32>;
/// Subject clustering over `f64` features.
pub type Clustering64 = apclust::Clustering<f64>;
/// Regressor ensemble over `f32` features.
pub type Ensemble32 = ensemble::Ensemble<f32>;
/// Regressor ensemble over `f64` features.
pub type Ensemble64 = ensemble::Ensemble<f64>;
/// Per-probe decision over `f32` features.
pub type Decision32 = openset::Decision<f32>;
/// Per-probe decision over `f64` features.
pub type Decision64 = openset::Decision<f64>;
