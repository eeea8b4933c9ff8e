//! The end-to-end per-probe decision: cluster selection, cached ensemble
//! training, vote ranking, and the known/unknown ratio test.
//!
//! A probe first selects its top-k clusters, pooling their subjects into a
//! candidate set. An ensemble trained for that candidate set (fetched from a
//! shared cache, so probes landing in the same clusters amortize training)
//! scores the probe into a ranked vote histogram. The detection ratio — the
//! top score over the mean of the next two — is then compared against a
//! threshold: at or above it, the probe is identified as the top candidate;
//! below it, the probe is declared unknown.

use crate::apclust::Clustering;
use crate::dataset::{FeatureVector, Gallery};
use crate::ensemble::{rank, vote, CacheKey, EnsembleCache, Ranking};
use crate::error::{Error, Result};
use crate::scalar::{real, Real};

/// Default number of top clusters pooled per probe.
pub const DEFAULT_TOP_CLUSTERS: usize = 20;
/// Default ensemble size (number of splits / models).
pub const DEFAULT_MODELS: usize = 60;
/// Default latent components per PLS model.
pub const DEFAULT_COMPONENTS: usize = 10;
/// Default early-stop tolerance handed to PLS fitting.
pub const DEFAULT_PLS_TOL: f64 = 1e-12;

/// Serde adapter keeping non-finite ratios lossless in JSON.
///
/// JSON has no literal for infinity (the default serializer emits `null`,
/// which does not round-trip), so non-finite values are encoded as the
/// strings `"inf"`, `"-inf"`, and `"nan"`; finite values stay plain numbers.
pub mod ratio_serde {
    use serde::{de, Deserializer, Serializer};

    use crate::scalar::Real;

    pub fn serialize<F: Real, S: Serializer>(
        value: &F,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        if value.is_finite() {
            value.serialize(serializer)
        } else if value.is_nan() {
            serializer.serialize_str("nan")
        } else if *value > F::zero() {
            serializer.serialize_str("inf")
        } else {
            serializer.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, F: Real, D: Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<F, D::Error> {
        struct RatioVisitor<F>(std::marker::PhantomData<F>);

        impl<F: Real> de::Visitor<'_> for RatioVisitor<F> {
            type Value = F;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                write!(f, "a number or one of \"inf\", \"-inf\", \"nan\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<F, E> {
                F::from_f64(v).ok_or_else(|| E::custom("unrepresentable number"))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<F, E> {
                self.visit_f64(v as f64)
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<F, E> {
                self.visit_f64(v as f64)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<F, E> {
                match v {
                    "inf" => Ok(F::infinity()),
                    "-inf" => Ok(F::neg_infinity()),
                    "nan" => Ok(F::nan()),
                    other => Err(E::custom(format!("invalid ratio string {other:?}"))),
                }
            }
        }

        deserializer.deserialize_any(RatioVisitor(std::marker::PhantomData))
    }
}

/// The verdict on one probe.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// The probe is accepted as this enrolled subject.
    Known(String),
    /// The probe is rejected as not enrolled.
    Unknown,
}

/// The full per-probe result: outcome, candidate ranking, and the ratio that
/// decided it.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(bound = "F: Real")]
pub struct Decision<F> {
    pub outcome: Outcome,
    /// Candidate ranking over every enrolled subject, best first.
    pub ranking: Ranking<F>,
    /// Top score over the mean of the next two (`+inf` when the runners-up
    /// are exactly zero, `0` when the top score is zero).
    #[serde(with = "ratio_serde")]
    pub ratio: F,
    pub threshold_used: F,
    /// Set when cluster selection produced fewer than two candidate subjects,
    /// so no ensemble could be trained; the probe is declared unknown with an
    /// all-zero ranking regardless of the threshold.
    pub degenerate_candidates: bool,
}

/// Knobs of the per-probe pipeline.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(bound = "F: Real")]
pub struct PipelineConfig<F> {
    /// Clusters pooled per probe.
    pub k: usize,
    /// Ensemble size.
    pub d: usize,
    /// Latent components per model.
    pub components: usize,
    /// Known/unknown acceptance threshold on the detection ratio.
    #[serde(with = "ratio_serde")]
    pub threshold: F,
    /// Seed for drawing the ensemble's split plan.
    pub train_seed: u64,
    /// PLS early-stop tolerance.
    pub tol: F,
}

impl<F: Real> PipelineConfig<F> {
    /// The default pipeline (k=20, d=60, c=10) at the given threshold.
    pub fn with_threshold(threshold: F) -> Self {
        Self {
            k: DEFAULT_TOP_CLUSTERS,
            d: DEFAULT_MODELS,
            components: DEFAULT_COMPONENTS,
            threshold,
            train_seed: 0,
            tol: real(DEFAULT_PLS_TOL),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParam("k must be at least 1".into()));
        }
        if self.d == 0 {
            return Err(Error::InvalidParam("d must be at least 1".into()));
        }
        if self.components == 0 {
            return Err(Error::InvalidParam(
                "components must be at least 1".into(),
            ));
        }
        if self.threshold.is_nan() || self.threshold < F::zero() {
            return Err(Error::InvalidParam(format!(
                "threshold must be a non-negative number, got {}",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// Top score divided by the mean of the second and third scores.
///
/// Rankings shorter than three entries are padded with zero scores, so a
/// lone dominant candidate drives the ratio to `+inf`; an all-zero (or
/// empty) ranking yields `0`.
pub fn detection_ratio<F: Real>(ranking: &[(String, F)]) -> F {
    let score = |i: usize| ranking.get(i).map_or_else(F::zero, |(_, s)| *s);
    let top = score(0);
    if top <= F::zero() {
        return F::zero();
    }
    let runner_up_mean = (score(1) + score(2)) / real(2.0);
    if runner_up_mean <= F::zero() {
        F::infinity()
    } else {
        top / runner_up_mean
    }
}

/// Decide one probe using cluster selection to narrow the candidate set.
///
/// Probes whose top-k clusters pool fewer than two subjects cannot train an
/// ensemble; they are declared unknown with the degenerate flag set rather
/// than erroring.
pub fn identify<F: Real>(
    train: &Gallery<F>,
    clustering: &Clustering<F>,
    probe: &FeatureVector<F>,
    config: &PipelineConfig<F>,
    cache: &EnsembleCache<F>,
) -> Result<Decision<F>> {
    config.validate()?;
    let candidates = clustering.select_top_clusters(&probe.values, config.k)?;
    if candidates.len() < 2 {
        log::warn!(
            "probe {}: top-{} clusters hold {} subject(s); declaring unknown",
            probe.sample_id,
            config.k,
            candidates.len()
        );
        let ranking = train
            .subject_ids()
            .into_iter()
            .map(|s| (s, F::zero()))
            .collect();
        return Ok(Decision {
            outcome: Outcome::Unknown,
            ranking,
            ratio: F::zero(),
            threshold_used: config.threshold,
            degenerate_candidates: true,
        });
    }
    score_candidates(train, candidates, probe, config, cache)
}

/// Decide one probe against the full gallery, bypassing cluster selection.
pub fn identify_no_cluster<F: Real>(
    train: &Gallery<F>,
    probe: &FeatureVector<F>,
    config: &PipelineConfig<F>,
    cache: &EnsembleCache<F>,
) -> Result<Decision<F>> {
    config.validate()?;
    score_candidates(train, train.subject_ids(), probe, config, cache)
}

fn score_candidates<F: Real>(
    train: &Gallery<F>,
    candidates: Vec<String>,
    probe: &FeatureVector<F>,
    config: &PipelineConfig<F>,
    cache: &EnsembleCache<F>,
) -> Result<Decision<F>> {
    let key = CacheKey {
        subjects: candidates,
        seed: config.train_seed,
        d: config.d,
        components: config.components,
    };
    let ensemble = cache.get_or_train(key, train, config.tol)?;
    let responses = ensemble.respond(&probe.values)?;
    let histogram = vote(&ensemble, &responses)?;
    let ranking = rank(&histogram);
    let ratio = detection_ratio(&ranking);
    let outcome = if ratio >= config.threshold {
        Outcome::Known(ranking[0].0.clone())
    } else {
        Outcome::Unknown
    };
    Ok(Decision {
        outcome,
        ranking,
        ratio,
        threshold_used: config.threshold,
        degenerate_candidates: false,
    })
}
