//! Synthetic Gaussian-blob datasets for tests and benchmarks.
//!
//! Each subject is a spherical Gaussian: a center drawn from
//! `between_spread * N(0, I)` and samples drawn from `center +
//! within_spread * N(0, I)`. Small `within_spread / between_spread` ratios
//! give well-separated identities; large ones approach chance.

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::FeatureVector;

/// Parameters for [`gen_synthetic`].
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    /// Number of regular subjects (ids `s0000`, `s0001`, ...).
    pub num_subjects: usize,
    /// Samples drawn per regular subject.
    pub samples_per_subject: usize,
    /// Additional single-sample subjects (ids `d0000`, ...). Under the
    /// sample-count split protocols these end up outside the enrolled set,
    /// so they provide unknown probes.
    pub distractors: usize,
    /// Feature dimension.
    pub dim: usize,
    /// Standard deviation of samples around their subject center.
    pub within_spread: f64,
    /// Standard deviation of subject centers around the origin.
    pub between_spread: f64,
    /// RNG seed; equal configs produce identical datasets.
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_subjects: 50,
            samples_per_subject: 5,
            distractors: 0,
            dim: 64,
            within_spread: 0.5,
            between_spread: 10.0,
            seed: 0,
        }
    }
}

/// Generate a flat record list: regular subjects first, then distractors,
/// each subject's samples contiguous and in draw order.
pub fn gen_synthetic<F: Real>(config: &SynthConfig) -> Result<Vec<FeatureVector<F>>>
where
    StandardNormal: Distribution<F>,
{
    if config.num_subjects < 2 {
        return Err(Error::InvalidParam(format!(
            "need at least 2 subjects, got {}",
            config.num_subjects
        )));
    }
    if config.samples_per_subject == 0 {
        return Err(Error::InvalidParam("samples_per_subject must be positive".into()));
    }
    if config.dim == 0 {
        return Err(Error::InvalidParam("dim must be positive".into()));
    }
    if config.within_spread.is_nan() || config.within_spread < 0.0 {
        return Err(Error::InvalidParam(
            "within_spread must be non-negative".into(),
        ));
    }
    if config.between_spread.is_nan() || config.between_spread <= 0.0 {
        return Err(Error::InvalidParam("between_spread must be positive".into()));
    }

    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let within = F::from_f64(config.within_spread).expect("spread fits in feature scalar");
    let between = F::from_f64(config.between_spread).expect("spread fits in feature scalar");

    let total =
        config.num_subjects * config.samples_per_subject + config.distractors;
    let mut records = Vec::with_capacity(total);
    let emit_subject = |rng: &mut ChaCha12Rng, subject_id: String, samples: usize,
                            records: &mut Vec<FeatureVector<F>>| {
        let center: Vec<F> = (0..config.dim)
            .map(|_| between * rng.sample::<F, _>(StandardNormal))
            .collect();
        for i in 0..samples {
            let values = center
                .iter()
                .map(|&c| c + within * rng.sample::<F, _>(StandardNormal))
                .collect();
            records.push(FeatureVector::new(
                format!("{subject_id}-{i:03}"),
                subject_id.clone(),
                values,
            ));
        }
    };

    for s in 0..config.num_subjects {
        emit_subject(
            &mut rng,
            format!("s{s:04}"),
            config.samples_per_subject,
            &mut records,
        );
    }
    for d in 0..config.distractors {
        emit_subject(&mut rng, format!("d{d:04}"), 1, &mut records);
    }
    Ok(records)
}
