//! The regressor ensemble: balanced random subject splits, per-split PLS
//! training, Hamming embeddings, probe responses, vote histograms, and
//! candidate ranking.
//!
//! Each of the `d` models is a binary PLS regressor trained on one random
//! fifty-fifty partition of the candidate subjects: samples of the positive
//! half get target `+1`, the rest `-1`. A subject's pattern of positive-side
//! memberships across all splits is its ±1 Hamming embedding. At query time
//! the probe's `d` responses are ReLU-filtered and accumulated into a
//! per-subject vote histogram, whose descending order is the candidate
//! ranking.

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Mutex};

use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;

use crate::dataset::{atomic_write, Gallery};
use crate::error::{Error, Result};
use crate::pls::{pls_fit, pls_predict, PlsModel};
use crate::scalar::Real;

/// One fifty-fifty subject partition; both sides are kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Split {
    pub positive: Vec<String>,
    pub negative: Vec<String>,
}

/// The full set of `d` random splits over a candidate subject set.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SplitPlan {
    /// The candidate subjects, ascending.
    pub subjects: Vec<String>,
    pub splits: Vec<Split>,
    pub seed: u64,
}

impl SplitPlan {
    pub fn d(&self) -> usize {
        self.splits.len()
    }
}

/// Draw `d` independent fifty-fifty splits of `subjects`.
///
/// Each split shuffles the sorted subject list with a generator seeded once
/// from `seed` and sends the first ⌈n/2⌉ subjects to the positive side, so
/// an odd candidate set leans positive by one.
pub fn make_splits(subjects: &[String], d: usize, seed: u64) -> Result<SplitPlan> {
    let mut sorted: Vec<String> = subjects.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() < 2 {
        return Err(Error::InvalidParam(format!(
            "need at least 2 subjects to form a split, got {}",
            sorted.len()
        )));
    }
    if d == 0 {
        return Err(Error::InvalidParam("need at least 1 split".into()));
    }
    let half = sorted.len().div_ceil(2);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut splits = Vec::with_capacity(d);
    for _ in 0..d {
        let mut shuffled = sorted.clone();
        shuffled.shuffle(&mut rng);
        let mut positive: Vec<String> = shuffled[..half].to_vec();
        let mut negative: Vec<String> = shuffled[half..].to_vec();
        positive.sort_unstable();
        negative.sort_unstable();
        splits.push(Split { positive, negative });
    }
    Ok(SplitPlan {
        subjects: sorted,
        splits,
        seed,
    })
}

/// The subject's ±1 embedding: bit `i` is `+1` iff the subject sits in split
/// `i`'s positive half.
pub fn hamming_of(plan: &SplitPlan, subject_id: &str) -> Result<Vec<i8>> {
    if plan.subjects.binary_search_by(|s| s.as_str().cmp(subject_id)).is_err() {
        return Err(Error::UnknownSubject(subject_id.to_string()));
    }
    Ok(plan
        .splits
        .iter()
        .map(|split| {
            if split
                .positive
                .binary_search_by(|s| s.as_str().cmp(subject_id))
                .is_ok()
            {
                1
            } else {
                -1
            }
        })
        .collect())
}

/// A trained ensemble, ready to score probes against `subject_universe`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Ensemble<F> {
    /// One model per split, in split order.
    pub models: Vec<PlsModel<F>>,
    pub plan: SplitPlan,
    /// All enrolled subjects (ascending) — the vote-histogram domain, which
    /// may be wider than the trained candidate set.
    pub subject_universe: Vec<String>,
    /// Latent components requested per model.
    pub components: usize,
}

/// Train one PLS model per split of `plan` on the samples of the candidate
/// subjects.
///
/// The design matrix is shared: all samples of `plan.subjects` in ascending
/// subject order (file order within a subject). Per split, targets are `+1`
/// for samples of positive-side subjects and `-1` otherwise.
pub fn train_ensemble<F: Real>(
    train: &Gallery<F>,
    plan: &SplitPlan,
    components: usize,
    tol: F,
) -> Result<Ensemble<F>> {
    for subject in &plan.subjects {
        if !train.contains_subject(subject) {
            return Err(Error::UnknownSubject(subject.clone()));
        }
    }

    let mut rows: Vec<&[F]> = Vec::new();
    let mut row_subject: Vec<&str> = Vec::new();
    for subject in &plan.subjects {
        for sample in train.samples_of(subject)? {
            rows.push(&sample.values);
            row_subject.push(subject);
        }
    }
    let n_rows = rows.len();
    let dim = train.dim();
    let mut x = Array2::zeros((n_rows, dim));
    for (r, values) in rows.iter().enumerate() {
        for (c, &v) in values.iter().enumerate() {
            x[[r, c]] = v;
        }
    }

    let mut models = Vec::with_capacity(plan.d());
    for (i, split) in plan.splits.iter().enumerate() {
        let y: Array1<F> = row_subject
            .iter()
            .map(|s| {
                if split.positive.binary_search_by(|p| p.as_str().cmp(s)).is_ok() {
                    F::one()
                } else {
                    -F::one()
                }
            })
            .collect();
        let positives = y.iter().filter(|v| **v > F::zero()).count();
        log::debug!(
            "split {i}: {positives} positive / {} negative samples",
            n_rows - positives
        );
        let model = pls_fit(x.view(), y.view(), components, tol).map_err(|e| {
            Error::InvalidData(format!("training model {i} of {}: {e}", plan.d()))
        })?;
        models.push(model);
    }

    Ok(Ensemble {
        models,
        plan: plan.clone(),
        subject_universe: train.subject_ids(),
        components,
    })
}

impl<F: Real> Ensemble<F> {
    /// Raw (unfiltered) response of every model to one probe vector.
    pub fn respond(&self, probe: &[F]) -> Result<Vec<F>> {
        self.models
            .iter()
            .map(|model| pls_predict(model, probe))
            .collect()
    }

    /// Write the ensemble as a deterministic JSON artifact.
    pub fn save(&self, path: &Path) -> Result<()> {
        atomic_write(path, |out| {
            serde_json::to_writer(&mut *out, self)?;
            use std::io::Write;
            out.write_all(b"\n")?;
            Ok(())
        })
    }

    /// Load an ensemble previously written by [`Ensemble::save`].
    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| {
            Error::InvalidData(format!("cannot open {}: {e}", path.display()))
        })?;
        let ensemble: Self = serde_json::from_reader(std::io::BufReader::new(file))?;
        if ensemble.models.len() != ensemble.plan.d() {
            return Err(Error::InvalidData(format!(
                "ensemble artifact {} has {} models for {} splits",
                path.display(),
                ensemble.models.len(),
                ensemble.plan.d()
            )));
        }
        Ok(ensemble)
    }
}

/// Accumulated per-subject votes, aligned with the ensemble's universe.
#[derive(Debug, Clone, PartialEq)]
pub struct VoteHistogram<F> {
    /// Subject ids, ascending (the full enrolled universe).
    pub subjects: Vec<String>,
    /// One non-negative accumulator per subject.
    pub scores: Vec<F>,
}

/// Accumulate the ReLU-filtered responses into a vote histogram.
///
/// For each split `i`, `max(0, r_i)` is added to the bin of every subject in
/// that split's positive half; subjects outside the trained candidate set
/// keep a bin of exactly zero.
pub fn vote<F: Real>(ensemble: &Ensemble<F>, responses: &[F]) -> Result<VoteHistogram<F>> {
    if responses.len() != ensemble.plan.d() {
        return Err(Error::DimMismatch {
            expected: ensemble.plan.d(),
            got: responses.len(),
        });
    }
    let subjects = ensemble.subject_universe.clone();
    let index: HashMap<&str, usize> = subjects
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let mut scores = vec![F::zero(); subjects.len()];
    for (split, &response) in ensemble.plan.splits.iter().zip(responses) {
        let filtered = response.max(F::zero());
        if filtered <= F::zero() {
            continue;
        }
        for subject in &split.positive {
            let &bin = index.get(subject.as_str()).ok_or_else(|| {
                Error::UnknownSubject(subject.clone())
            })?;
            scores[bin] += filtered;
        }
    }
    Ok(VoteHistogram { subjects, scores })
}

/// A candidate list: subjects with scores, descending (ties: ascending id).
pub type Ranking<F> = Vec<(String, F)>;

/// Sort a histogram into the candidate ranking.
pub fn rank<F: Real>(histogram: &VoteHistogram<F>) -> Ranking<F> {
    let mut order: Vec<usize> = (0..histogram.subjects.len()).collect();
    order.sort_by(|&a, &b| {
        histogram.scores[b]
            .partial_cmp(&histogram.scores[a])
            .expect("finite votes")
            .then_with(|| histogram.subjects[a].cmp(&histogram.subjects[b]))
    });
    order
        .into_iter()
        .map(|i| (histogram.subjects[i].clone(), histogram.scores[i]))
        .collect()
}

/// Cache key: everything training depends on.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey {
    /// Sorted candidate subjects.
    pub subjects: Vec<String>,
    pub seed: u64,
    pub d: usize,
    pub components: usize,
}

/// In-process ensemble cache, shared across probes of one run.
///
/// Probes selecting the same candidate set reuse the trained ensemble; the
/// cache is behind a mutex, so concurrent probe workers can share it.
pub struct EnsembleCache<F> {
    inner: Mutex<HashMap<CacheKey, Arc<Ensemble<F>>>>,
}

impl<F: Real> EnsembleCache<F> {
    pub fn new() -> Self {
        Self {
            inner: Mutex::new(HashMap::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Fetch the ensemble for `key`, training it on a miss.
    pub fn get_or_train(
        &self,
        key: CacheKey,
        train: &Gallery<F>,
        tol: F,
    ) -> Result<Arc<Ensemble<F>>> {
        let mut cache = self.inner.lock().expect("cache poisoned");
        if let Some(hit) = cache.get(&key) {
            return Ok(Arc::clone(hit));
        }
        let plan = make_splits(&key.subjects, key.d, key.seed)?;
        let ensemble = Arc::new(train_ensemble(train, &plan, key.components, tol)?);
        cache.insert(key, Arc::clone(&ensemble));
        Ok(ensemble)
    }
}

impl<F: Real> Default for EnsembleCache<F> {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::FeatureVector;

    fn ids(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    /// An ensemble shell with a hand-written plan, for vote/rank tests.
    fn shell(universe: &[&str], positives: &[&[&str]]) -> Ensemble<f64> {
        let subjects: Vec<String> = {
            let mut all: Vec<String> = positives
                .iter()
                .flat_map(|p| p.iter().map(|s| s.to_string()))
                .collect();
            all.sort_unstable();
            all.dedup();
            all
        };
        let splits = positives
            .iter()
            .map(|p| {
                let positive = ids(p);
                let negative: Vec<String> = subjects
                    .iter()
                    .filter(|s| !positive.contains(s))
                    .cloned()
                    .collect();
                Split { positive, negative }
            })
            .collect();
        Ensemble {
            models: Vec::new(),
            plan: SplitPlan {
                subjects,
                splits,
                seed: 0,
            },
            subject_universe: ids(universe),
            components: 0,
        }
    }

    #[test]
    fn two_subjects_force_one_per_side() {
        let plan = make_splits(&ids(&["A", "B"]), 1, 0).unwrap();
        assert_eq!(plan.splits[0].positive.len(), 1);
        assert_eq!(plan.splits[0].negative.len(), 1);
    }

    #[test]
    fn odd_sets_lean_positive() {
        let subjects = ids(&["a", "b", "c", "d", "e", "f", "g"]);
        let plan = make_splits(&subjects, 10, 3).unwrap();
        for split in &plan.splits {
            assert_eq!(split.positive.len(), 4);
            assert_eq!(split.negative.len(), 3);
        }
    }

    #[test]
    fn splits_partition_the_subject_set() {
        let subjects: Vec<String> = (0..11).map(|i| format!("s{i:02}")).collect();
        let plan = make_splits(&subjects, 20, 7).unwrap();
        for split in &plan.splits {
            let mut union = split.positive.clone();
            union.extend_from_slice(&split.negative);
            union.sort_unstable();
            assert_eq!(union, plan.subjects);
            assert!(split.positive.iter().all(|s| !split.negative.contains(s)));
        }
    }

    #[test]
    fn plans_are_seed_deterministic() {
        let subjects: Vec<String> = (0..100).map(|i| format!("s{i:03}")).collect();
        let a = make_splits(&subjects, 60, 5).unwrap();
        let b = make_splits(&subjects, 60, 5).unwrap();
        assert_eq!(a, b);
        let c = make_splits(&subjects, 60, 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn undersized_or_empty_requests_fail() {
        assert!(make_splits(&ids(&["A"]), 1, 0).is_err());
        assert!(make_splits(&ids(&["A", "B"]), 0, 0).is_err());
    }

    #[test]
    fn embedding_follows_positive_membership() {
        let e = shell(&["A", "B", "C"], &[&["A"], &["B", "C"], &["A", "C"]]);
        assert_eq!(hamming_of(&e.plan, "A").unwrap(), vec![1, -1, 1]);
        assert_eq!(hamming_of(&e.plan, "B").unwrap(), vec![-1, 1, -1]);
        assert_eq!(hamming_of(&e.plan, "C").unwrap(), vec![-1, 1, 1]);
        assert!(hamming_of(&e.plan, "Z").is_err());
    }

    #[test]
    fn embedding_matches_plan_for_random_splits() {
        let subjects: Vec<String> = (0..9).map(|i| format!("s{i}")).collect();
        let plan = make_splits(&subjects, 16, 11).unwrap();
        for subject in &subjects {
            let embedding = hamming_of(&plan, subject).unwrap();
            for (bit, split) in embedding.iter().zip(&plan.splits) {
                let in_positive = split.positive.contains(subject);
                assert_eq!(*bit == 1, in_positive);
            }
        }
    }

    fn two_point_gallery() -> Gallery<f64> {
        Gallery::from_records(vec![
            FeatureVector::new("a-0", "A", vec![0.0, 0.0]),
            FeatureVector::new("b-0", "B", vec![10.0, 10.0]),
        ])
        .unwrap()
    }

    #[test]
    fn single_model_separates_two_subjects() {
        let gallery = two_point_gallery();
        let plan = make_splits(&ids(&["A", "B"]), 1, 0).unwrap();
        let ensemble = train_ensemble(&gallery, &plan, 1, 1e-12).unwrap();
        let near_a = ensemble.respond(&[0.5, -0.5]).unwrap()[0];
        let near_b = ensemble.respond(&[9.5, 10.5]).unwrap()[0];
        assert!(
            near_a * near_b < 0.0,
            "responses should have opposite signs: {near_a} vs {near_b}"
        );
    }

    #[test]
    fn probe_at_the_global_mean_returns_each_y_mean() {
        let gallery = two_point_gallery();
        let plan = make_splits(&ids(&["A", "B"]), 4, 1).unwrap();
        let ensemble = train_ensemble(&gallery, &plan, 1, 1e-12).unwrap();
        let responses = ensemble.respond(&[5.0, 5.0]).unwrap();
        assert_eq!(responses.len(), 4);
        for (response, model) in responses.iter().zip(&ensemble.models) {
            assert!((response - model.y_mean).abs() < 1e-12);
        }
    }

    #[test]
    fn training_errors_carry_the_split_index() {
        let gallery = Gallery::from_records(vec![
            FeatureVector::new("a-0", "A", vec![1.0, 2.0]),
            FeatureVector::new("b-0", "B", vec![1.0, 2.0]),
        ])
        .unwrap();
        let plan = make_splits(&ids(&["A", "B"]), 1, 0).unwrap();
        let err = train_ensemble(&gallery, &plan, 1, 1e-12).unwrap_err();
        assert!(err.to_string().contains("model 0"), "{err}");
    }

    #[test]
    fn missing_subject_is_rejected() {
        let gallery = two_point_gallery();
        let plan = make_splits(&ids(&["A", "Z"]), 1, 0).unwrap();
        assert!(matches!(
            train_ensemble(&gallery, &plan, 1, 1e-12),
            Err(Error::UnknownSubject(_))
        ));
    }

    #[test]
    fn votes_accumulate_filtered_responses() {
        let e = shell(&["A", "B", "C", "D"], &[&["A", "B"], &["B", "C"]]);
        let h = vote(&e, &[0.5, 0.3]).unwrap();
        assert_eq!(h.subjects, ids(&["A", "B", "C", "D"]));
        assert_eq!(h.scores, vec![0.5, 0.8, 0.3, 0.0]);
    }

    #[test]
    fn negative_responses_are_filtered_out() {
        let e = shell(&["A", "B", "C"], &[&["A", "B"], &["B", "C"]]);
        let h = vote(&e, &[-0.5, -0.1]).unwrap();
        assert!(h.scores.iter().all(|&s| s == 0.0));

        let mixed = vote(&e, &[-0.5, 0.2]).unwrap();
        assert_eq!(mixed.scores, vec![0.0, 0.2, 0.2]);
    }

    #[test]
    fn vote_conserves_mass() {
        let e = shell(
            &["A", "B", "C", "D", "E"],
            &[&["A", "B", "C"], &["B", "D"], &["A", "D"]],
        );
        let responses = [0.25, 0.4, 0.1];
        let h = vote(&e, &responses).unwrap();
        let total: f64 = h.scores.iter().sum();
        let expected = 0.25 * 3.0 + 0.4 * 2.0 + 0.1 * 2.0;
        assert!((total - expected).abs() < 1e-12);
    }

    #[test]
    fn votes_match_exhaustive_enumeration() {
        use rand::prelude::*;
        use rand_chacha::ChaCha12Rng;
        for seed in 0..10u64 {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let n = rng.random_range(2..=10usize);
            let d = rng.random_range(1..=8usize);
            let subjects: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
            let plan = make_splits(&subjects, d, seed.wrapping_mul(77)).unwrap();
            let e = Ensemble {
                models: Vec::new(),
                plan,
                subject_universe: subjects.clone(),
                components: 0,
            };
            let responses: Vec<f64> =
                (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let h = vote(&e, &responses).unwrap();
            // exhaustive oracle: per subject, sum filtered responses of the
            // splits whose positive side contains it, in split order
            for (subject, &score) in h.subjects.iter().zip(&h.scores) {
                let mut expected = 0.0f64;
                for (split, &r) in e.plan.splits.iter().zip(&responses) {
                    if split.positive.contains(subject) {
                        expected += r.max(0.0);
                    }
                }
                assert_eq!(score, expected, "seed {seed} subject {subject}");
            }
        }
    }

    #[test]
    fn response_length_is_checked() {
        let e = shell(&["A", "B"], &[&["A"], &["B"]]);
        assert!(matches!(
            vote(&e, &[0.1]),
            Err(Error::DimMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn ranking_sorts_descending_with_id_ties() {
        let h = VoteHistogram {
            subjects: ids(&["A", "B", "C"]),
            scores: vec![0.5, 0.8, 0.3],
        };
        let r = rank(&h);
        let order: Vec<&str> = r.iter().map(|(s, _)| s.as_str()).collect();
        assert_eq!(order, vec!["B", "A", "C"]);

        let zeros = VoteHistogram {
            subjects: ids(&["c", "a", "b"]),
            scores: vec![0.0, 0.0, 0.0],
        };
        let r = rank(&zeros);
        let order: Vec<&str> = r.iter().map(|(s, _)| s.as_str()).collect();
        assert_eq!(order, vec!["a", "b", "c"], "ties resolve by id");
    }

    #[test]
    fn positive_scaling_preserves_rank_order() {
        let e = shell(&["A", "B", "C", "D"], &[&["A", "B"], &["B", "C"], &["C"]]);
        let responses = [0.7, 0.2, 0.4];
        let base = rank(&vote(&e, &responses).unwrap());
        let scaled_responses: Vec<f64> = responses.iter().map(|r| r * 3.5).collect();
        let scaled = rank(&vote(&e, &scaled_responses).unwrap());
        let base_order: Vec<&str> = base.iter().map(|(s, _)| s.as_str()).collect();
        let scaled_order: Vec<&str> = scaled.iter().map(|(s, _)| s.as_str()).collect();
        assert_eq!(base_order, scaled_order);
    }

    #[test]
    fn retraining_is_byte_identical_and_round_trips() {
        let gallery = Gallery::from_records(vec![
            FeatureVector::new("a-0", "A", vec![0.0, 0.1]),
            FeatureVector::new("a-1", "A", vec![0.1, 0.0]),
            FeatureVector::new("b-0", "B", vec![9.9, 10.0]),
            FeatureVector::new("b-1", "B", vec![10.0, 9.9]),
            FeatureVector::new("c-0", "C", vec![-10.0, 10.0]),
            FeatureVector::new("c-1", "C", vec![-9.9, 10.1]),
        ])
        .unwrap();
        let plan = make_splits(&gallery.subject_ids(), 6, 42).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let first = dir.path().join("e1.json");
        let second = dir.path().join("e2.json");
        train_ensemble(&gallery, &plan, 2, 1e-12)
            .unwrap()
            .save(&first)
            .unwrap();
        train_ensemble(&gallery, &plan, 2, 1e-12)
            .unwrap()
            .save(&second)
            .unwrap();
        assert_eq!(
            std::fs::read(&first).unwrap(),
            std::fs::read(&second).unwrap()
        );

        let loaded = Ensemble::<f64>::load(&first).unwrap();
        let retrained = train_ensemble(&gallery, &plan, 2, 1e-12).unwrap();
        assert_eq!(loaded, retrained);
        for model in &retrained.models {
            assert!(model.components_used >= 1);
        }
    }

    #[test]
    fn cache_reuses_trained_ensembles() {
        let gallery = two_point_gallery();
        let cache = EnsembleCache::new();
        let key = CacheKey {
            subjects: ids(&["A", "B"]),
            seed: 0,
            d: 2,
            components: 1,
        };
        let first = cache.get_or_train(key.clone(), &gallery, 1e-12).unwrap();
        let second = cache.get_or_train(key, &gallery, 1e-12).unwrap();
        assert!(Arc::ptr_eq(&first, &second));
        assert_eq!(cache.len(), 1);

        let other = CacheKey {
            subjects: ids(&["A", "B"]),
            seed: 1,
            d: 2,
            components: 1,
        };
        let third = cache.get_or_train(other, &gallery, 1e-12).unwrap();
        assert!(!Arc::ptr_eq(&first, &third));
        assert_eq!(cache.len(), 2);
    }
}
