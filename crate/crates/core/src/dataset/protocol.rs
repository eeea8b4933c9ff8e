//! Open-set evaluation splits.
//!
//! A protocol split partitions one labeled dataset into an enrolled training
//! gallery and a probe set containing both genuine probes (enrolled subjects)
//! and impostor probes (subjects absent from the gallery, relabeled with the
//! reserved `"?"` id). Three styles are provided, differing in how subjects
//! qualify for enrollment and how the impostor side is sized.

use std::collections::BTreeMap;

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::{FeatureVector, UNKNOWN_SUBJECT};

/// How subjects are divided into enrolled and unknown sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolStyle {
    /// Subjects with at least `min_train + probes_per_known` samples are
    /// enrolled and contribute exactly `probes_per_known` probes; everyone
    /// else becomes an unknown probe source.
    Rowden,
    /// Subjects with more than `min_train` samples are enrolled. The rest are
    /// split evenly into *known unknowns* and *unknown unknowns*; both kinds
    /// appear as `"?"` probes and the division is recorded in the counts.
    Gunther,
    /// Enrolled subjects qualify as in `Rowden`; the unknown probe count is
    /// sized by an openness target `op = U / (K + U)` over probe counts,
    /// drawing from the non-qualifying subject pool.
    Openness,
}

impl std::fmt::Display for ProtocolStyle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ProtocolStyle::Rowden => "rowden",
            ProtocolStyle::Gunther => "gunther",
            ProtocolStyle::Openness => "openness",
        })
    }
}

impl std::str::FromStr for ProtocolStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rowden" => Ok(ProtocolStyle::Rowden),
            "gunther" => Ok(ProtocolStyle::Gunther),
            "openness" => Ok(ProtocolStyle::Openness),
            other => Err(Error::InvalidParam(format!(
                "unknown protocol style {other:?} (expected rowden, gunther or openness)"
            ))),
        }
    }
}

/// Parameters for [`split_protocol`].
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ProtocolConfig {
    pub style: ProtocolStyle,
    /// Minimum training samples for an enrolled subject.
    pub min_train: usize,
    /// Probe samples per subject: enrolled subjects contribute exactly this
    /// many, unknown subjects at most this many.
    pub probes_per_known: usize,
    /// Optional cap on training samples per enrolled subject.
    pub cap: Option<usize>,
    /// Openness target `U / (K + U)` over probe counts; only used by
    /// [`ProtocolStyle::Openness`].
    pub openness: f64,
    /// Seed for sample selection and pool shuffles.
    pub seed: u64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            style: ProtocolStyle::Rowden,
            min_train: 2,
            probes_per_known: 1,
            cap: None,
            openness: 0.5,
            seed: 0,
        }
    }
}

/// Subject and sample counts of a finished split, recorded in run metadata.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SplitCounts {
    pub known_subjects: usize,
    /// Unknown-probe subjects counted as "known unknowns" (Gunther style;
    /// zero elsewhere). They are still emitted as `"?"` probes.
    pub known_unknown_subjects: usize,
    /// Remaining unknown-probe subjects.
    pub unknown_subjects: usize,
    pub train_samples: usize,
    pub known_probes: usize,
    pub unknown_probes: usize,
}

/// Result of [`split_protocol`]: disjoint train and probe record lists.
///
/// Probes list genuine samples first (sorted by subject), then unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolSplit<F> {
    pub train: Vec<FeatureVector<F>>,
    pub probes: Vec<FeatureVector<F>>,
    pub counts: SplitCounts,
}

/// The role a subject plays in the finished split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Known,
    KnownUnknown,
    UnknownUnknown,
    Dropped,
}

/// Partition `records` into train and probe sets under `config`.
///
/// Deterministic for a fixed input and config: subjects are processed in
/// ascending id order and all randomness comes from one seeded generator.
pub fn split_protocol<F: Real>(
    records: Vec<FeatureVector<F>>,
    config: &ProtocolConfig,
) -> Result<ProtocolSplit<F>> {
    if config.min_train == 0 {
        return Err(Error::InvalidParam("min_train must be positive".into()));
    }
    if config.probes_per_known == 0 {
        return Err(Error::InvalidParam(
            "probes_per_known must be positive".into(),
        ));
    }
    if config.cap == Some(0) {
        return Err(Error::InvalidParam("cap must be positive".into()));
    }

    let mut by_subject: BTreeMap<String, Vec<FeatureVector<F>>> = BTreeMap::new();
    for rec in records {
        if rec.is_unknown() {
            return Err(Error::InvalidData(format!(
                "sample {:?} already carries the reserved unknown subject id",
                rec.sample_id
            )));
        }
        by_subject.entry(rec.subject_id.clone()).or_default().push(rec);
    }
    if by_subject.is_empty() {
        return Err(Error::Empty("no records to split"));
    }

    let ppk = config.probes_per_known;
    let qualifies = |count: usize| match config.style {
        ProtocolStyle::Rowden | ProtocolStyle::Openness => count >= config.min_train + ppk,
        // an enrolled subject must keep at least one training sample after
        // giving up its probes
        ProtocolStyle::Gunther => count > config.min_train && count > ppk,
    };

    let subjects: Vec<&String> = by_subject.keys().collect();
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);

    // Shuffle every subject's sample order up front, in sorted-subject order,
    // so the per-subject draws do not depend on style decisions made later.
    let mut sample_order: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for id in &subjects {
        let mut idx: Vec<usize> = (0..by_subject[*id].len()).collect();
        idx.shuffle(&mut rng);
        sample_order.insert(id.as_str(), idx);
    }

    let qualifying: Vec<&str> = subjects
        .iter()
        .filter(|id| qualifies(by_subject[**id].len()))
        .map(|id| id.as_str())
        .collect();
    let rest: Vec<&str> = subjects
        .iter()
        .filter(|id| !qualifies(by_subject[**id].len()))
        .map(|id| id.as_str())
        .collect();

    if qualifying.is_empty() {
        return Err(Error::InfeasibleSplit(
            "no subject has enough samples to be enrolled \
             (lower min_train or provide more samples)"
                .into(),
        ));
    }
    if qualifying.len() == 1 {
        log::warn!(
            "only one subject qualifies for enrollment; the resulting training \
             set cannot serve as an identification gallery"
        );
    }

    // Assign a role and an unknown-probe budget to every subject.
    let mut roles: BTreeMap<&str, Role> = BTreeMap::new();
    let mut unknown_take: BTreeMap<&str, usize> = BTreeMap::new();
    for id in &qualifying {
        roles.insert(id, Role::Known);
    }
    match config.style {
        ProtocolStyle::Rowden => {
            for id in &rest {
                roles.insert(id, Role::UnknownUnknown);
                unknown_take.insert(id, ppk.min(by_subject[*id].len()));
            }
        }
        ProtocolStyle::Gunther => {
            // Split the leftover pool evenly; which subjects land in the
            // labeled half is random but the emitted probes are identical.
            let mut pool = rest.clone();
            pool.shuffle(&mut rng);
            let labeled = pool.len().div_ceil(2);
            for (i, id) in pool.iter().enumerate() {
                let role = if i < labeled {
                    Role::KnownUnknown
                } else {
                    Role::UnknownUnknown
                };
                roles.insert(id, role);
                unknown_take.insert(id, ppk.min(by_subject[*id].len()));
            }
        }
        ProtocolStyle::Openness => {
            let op = config.openness;
            if !(0.0..=1.0).contains(&op) {
                return Err(Error::InvalidParam(format!(
                    "openness must lie in [0, 1], got {op}"
                )));
            }
            if op == 1.0 {
                return Err(Error::InfeasibleSplit(
                    "openness 1 would leave no enrolled subjects".into(),
                ));
            }
            let known_probes = qualifying.len() * ppk;
            let target = (known_probes as f64 * op / (1.0 - op)).round() as usize;
            let mut pool = rest.clone();
            pool.shuffle(&mut rng);
            let mut remaining = target;
            for id in &pool {
                let take = remaining.min(ppk).min(by_subject[*id].len());
                if take > 0 {
                    roles.insert(id, Role::UnknownUnknown);
                    unknown_take.insert(id, take);
                    remaining -= take;
                } else {
                    roles.insert(id, Role::Dropped);
                }
            }
            if remaining > 0 {
                return Err(Error::InfeasibleSplit(format!(
                    "openness {op} with {known_probes} genuine probes needs {target} \
                     unknown probes but the non-enrolled pool can supply only {}",
                    target - remaining
                )));
            }
        }
    }

    // Materialize train and probe lists in sorted-subject order.
    let mut counts = SplitCounts {
        known_subjects: 0,
        known_unknown_subjects: 0,
        unknown_subjects: 0,
        train_samples: 0,
        known_probes: 0,
        unknown_probes: 0,
    };
    let mut train: Vec<FeatureVector<F>> = Vec::new();
    let mut known_probes: Vec<FeatureVector<F>> = Vec::new();
    let mut unknown_probes: Vec<FeatureVector<F>> = Vec::new();

    for id in &subjects {
        let samples = &by_subject[*id];
        let order = &sample_order[id.as_str()];
        let take_sorted = |slice: &[usize]| {
            let mut picked = slice.to_vec();
            picked.sort_unstable();
            picked
        };
        match roles[id.as_str()] {
            Role::Known => {
                counts.known_subjects += 1;
                let probe_idx = take_sorted(&order[..ppk]);
                let mut train_idx = take_sorted(&order[ppk..]);
                if let Some(cap) = config.cap {
                    train_idx.truncate(cap);
                }
                counts.train_samples += train_idx.len();
                counts.known_probes += probe_idx.len();
                train.extend(train_idx.iter().map(|&i| samples[i].clone()));
                known_probes.extend(probe_idx.iter().map(|&i| samples[i].clone()));
            }
            role @ (Role::KnownUnknown | Role::UnknownUnknown) => {
                if role == Role::KnownUnknown {
                    counts.known_unknown_subjects += 1;
                } else {
                    counts.unknown_subjects += 1;
                }
                let take = unknown_take[id.as_str()];
                let probe_idx = take_sorted(&order[..take]);
                counts.unknown_probes += probe_idx.len();
                for &i in &probe_idx {
                    let mut rec = samples[i].clone();
                    rec.subject_id = UNKNOWN_SUBJECT.to_string();
                    unknown_probes.push(rec);
                }
            }
            Role::Dropped => {}
        }
    }

    let mut probes = known_probes;
    probes.extend(unknown_probes);
    Ok(ProtocolSplit {
        train,
        probes,
        counts,
    })
}
