//! Cross-module invariants checked over randomized inputs: a mix of
//! proptest shrinkable properties for small pure functions and seeded loops
//! for the data-heavy pipeline stages.

use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;

use osid::apclust::{cluster_centroids, ClusterParams};
use osid::dataset::{
    gen_synthetic, load_gallery, save_gallery, split_protocol, FeatureVector,
    FileFormat, Gallery, ProtocolConfig, ProtocolStyle, SynthConfig,
};
use osid::ensemble::{make_splits, rank, vote, Ensemble};
use osid::metrics::{dir_far_curve, roc_auc, ProbeResult, ThresholdSweep};
use osid::openset::detection_ratio;
use osid::pls::{pls_fit, pls_predict};

proptest! {
    /// Every split is a balanced partition of the candidate subjects.
    #[test]
    fn split_plans_partition_and_balance(
        n in 2usize..12,
        d in 1usize..10,
        seed in any::<u64>(),
    ) {
        let subjects: Vec<String> = (0..n).map(|i| format!("s{i:02}")).collect();
        let plan = make_splits(&subjects, d, seed).unwrap();
        prop_assert_eq!(plan.splits.len(), d);
        for split in &plan.splits {
            prop_assert_eq!(split.positive.len(), n.div_ceil(2));
            let mut union = split.positive.clone();
            union.extend_from_slice(&split.negative);
            union.sort_unstable();
            prop_assert_eq!(&union, &subjects);
        }
    }

    /// Scaling all scores by a power of two leaves the ratio bit-identical,
    /// and the ratio is never negative.
    #[test]
    fn ratio_scale_invariance_is_exact(
        scores in prop::collection::vec(0.0f64..10.0, 0..6),
        exponent in -3i32..10,
    ) {
        let ranking: Vec<(String, f64)> = scores
            .iter()
            .enumerate()
            .map(|(i, &s)| (format!("s{i}"), s))
            .collect();
        let base = detection_ratio(&ranking);
        prop_assert!(base >= 0.0);
        let scale = 2.0f64.powi(exponent);
        let scaled: Vec<(String, f64)> = ranking
            .iter()
            .map(|(s, v)| (s.clone(), v * scale))
            .collect();
        prop_assert_eq!(detection_ratio(&scaled), base);
    }

    /// Subject centroids stay inside the per-component bounding box of the
    /// subject's samples.
    #[test]
    fn centroids_stay_inside_sample_bounds(
        samples in prop::collection::vec(
            prop::collection::vec(-100.0f64..100.0, 3),
            1..6,
        ),
    ) {
        let mut records: Vec<FeatureVector<f64>> = samples
            .iter()
            .enumerate()
            .map(|(i, v)| FeatureVector::new(format!("a-{i}"), "a", v.clone()))
            .collect();
        records.push(FeatureVector::new("b-0", "b", vec![0.0, 0.0, 0.0]));
        let gallery = Gallery::from_records(records).unwrap();
        let centroid = gallery.centroid("a").unwrap();
        for c in 0..3 {
            let lo = samples.iter().map(|v| v[c]).fold(f64::INFINITY, f64::min);
            let hi = samples.iter().map(|v| v[c]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(centroid[c] >= lo - 1e-9 && centroid[c] <= hi + 1e-9);
        }
    }
}

fn random_gallery(rng: &mut ChaCha12Rng, subjects: usize, samples: usize, dim: usize) -> Gallery<f64> {
    let mut records = Vec::new();
    for s in 0..subjects {
        for i in 0..samples {
            let values: Vec<f64> = (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect();
            records.push(FeatureVector::new(
                format!("s{s:02}-{i}"),
                format!("s{s:02}"),
                values,
            ));
        }
    }
    Gallery::from_records(records).unwrap()
}

#[test]
fn gallery_io_round_trips_in_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    for seed in 0..5u64 {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let gallery = random_gallery(&mut rng, 4, 3, 5);
        for format in [FileFormat::Csv, FileFormat::Jsonl] {
            let path = dir.path().join(format!("g{seed}.{}", format.extension()));
            save_gallery(&path, format, &gallery).unwrap();
            let loaded: Gallery<f64> = load_gallery(&path, format).unwrap();
            assert_eq!(loaded.to_records(), gallery.to_records(), "{format} seed {seed}");
        }
    }
}

#[test]
fn protocol_splits_keep_train_and_probe_disjoint() {
    for (style, seed) in [
        (ProtocolStyle::Rowden, 1u64),
        (ProtocolStyle::Rowden, 2),
        (ProtocolStyle::Gunther, 3),
        (ProtocolStyle::Gunther, 4),
        (ProtocolStyle::Openness, 5),
        (ProtocolStyle::Openness, 6),
    ] {
        let mut rng = ChaCha12Rng::seed_from_u64(seed.wrapping_mul(97));
        let mut records = Vec::new();
        for s in 0..12 {
            let count = rng.random_range(1..=6);
            for i in 0..count {
                records.push(FeatureVector::new(
                    format!("s{s:02}-{i}"),
                    format!("s{s:02}"),
                    vec![rng.random_range(-1.0..1.0); 3],
                ));
            }
        }
        let config = ProtocolConfig {
            style,
            openness: 0.4,
            seed,
            ..ProtocolConfig::default()
        };
        let split = match split_protocol(records, &config) {
            Ok(s) => s,
            // a randomized census can be infeasible for the openness target
            Err(_) => continue,
        };
        let train_ids: std::collections::BTreeSet<&str> =
            split.train.iter().map(|r| r.sample_id.as_str()).collect();
        for probe in &split.probes {
            assert!(
                !train_ids.contains(probe.sample_id.as_str()),
                "{style} seed {seed}: probe {} leaked into train",
                probe.sample_id
            );
        }
        assert!(split.train.iter().all(|r| !r.is_unknown()));
        assert_eq!(split.train.len(), split.counts.train_samples);
        assert_eq!(
            split.probes.iter().filter(|p| p.is_unknown()).count(),
            split.counts.unknown_probes
        );
    }
}

#[test]
fn pls_residuals_shrink_as_components_grow() {
    for seed in 0..6u64 {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let n = 12;
        let p = 5;
        let x = Array2::from_shape_fn((n, p), |_| rng.random_range(-2.0..2.0));
        let y = Array1::from_shape_fn(n, |i| if i % 2 == 0 { 1.0 } else { -1.0 });
        let mut previous = f64::INFINITY;
        for c in 1..=p {
            let model = pls_fit(x.view(), y.view(), c, 1e-12).unwrap();
            let rss: f64 = (0..n)
                .map(|i| {
                    let row: Vec<f64> = x.row(i).to_vec();
                    let e = pls_predict(&model, &row).unwrap() - y[i];
                    e * e
                })
                .sum();
            assert!(
                rss <= previous + 1e-9,
                "seed {seed}: RSS rose from {previous} to {rss} at c={c}"
            );
            previous = rss;
        }
    }
}

#[test]
fn pls_is_invariant_to_training_row_order() {
    for seed in 0..6u64 {
        let mut rng = ChaCha12Rng::seed_from_u64(seed.wrapping_add(100));
        let n = 10;
        let p = 4;
        let x = Array2::from_shape_fn((n, p), |_| rng.random_range(-2.0..2.0));
        let y = Array1::from_shape_fn(n, |i| if i < n / 2 { 1.0 } else { -1.0 });
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let xp = Array2::from_shape_fn((n, p), |(i, j)| x[[order[i], j]]);
        let yp = Array1::from_shape_fn(n, |i| y[order[i]]);

        let base = pls_fit(x.view(), y.view(), 3, 1e-12).unwrap();
        let permuted = pls_fit(xp.view(), yp.view(), 3, 1e-12).unwrap();
        let probe: Vec<f64> = (0..p).map(|_| rng.random_range(-2.0..2.0)).collect();
        let a = pls_predict(&base, &probe).unwrap();
        let b = pls_predict(&permuted, &probe).unwrap();
        assert!(
            (a - b).abs() <= 1e-8 * a.abs().max(1.0),
            "seed {seed}: {a} vs {b}"
        );
    }
}

#[test]
fn vote_mass_is_conserved_and_scales_exactly() {
    for seed in 0..10u64 {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let n = rng.random_range(2..=9usize);
        let d = rng.random_range(1..=12usize);
        let subjects: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
        let plan = make_splits(&subjects, d, seed).unwrap();
        let ensemble = Ensemble::<f64> {
            models: Vec::new(),
            plan,
            subject_universe: subjects,
            components: 0,
        };
        let responses: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let histogram = vote(&ensemble, &responses).unwrap();

        let expected: f64 = ensemble
            .plan
            .splits
            .iter()
            .zip(&responses)
            .map(|(split, &r)| r.max(0.0) * split.positive.len() as f64)
            .sum();
        let total: f64 = histogram.scores.iter().sum();
        assert!((total - expected).abs() < 1e-12, "seed {seed}");

        let doubled: Vec<f64> = responses.iter().map(|r| r * 2.0).collect();
        let scaled = vote(&ensemble, &doubled).unwrap();
        for (a, b) in histogram.scores.iter().zip(&scaled.scores) {
            assert_eq!(a * 2.0, *b, "power-of-two scaling is exact");
        }
        let base: Vec<String> = rank(&histogram).into_iter().map(|(s, _)| s).collect();
        let after: Vec<String> = rank(&scaled).into_iter().map(|(s, _)| s).collect();
        assert_eq!(base, after, "scaling never reorders candidates");
    }
}

#[test]
fn cluster_selection_grows_with_k_and_marr_saturates() {
    let records = gen_synthetic::<f64>(&SynthConfig {
        num_subjects: 12,
        samples_per_subject: 3,
        dim: 6,
        within_spread: 0.4,
        between_spread: 8.0,
        seed: 21,
        ..SynthConfig::default()
    })
    .unwrap();
    let gallery = Gallery::from_records(records).unwrap();
    let clustering =
        cluster_centroids(gallery.centroids(), &ClusterParams::default()).unwrap();
    let clusters = clustering.num_clusters();
    assert!(clusters >= 2, "fixture should form several clusters");

    let probes = osid::dataset::ProbeSet::from_records(
        gallery
            .iter()
            .map(|(_, samples)| samples[0].clone())
            .collect(),
    )
    .unwrap();

    let mut previous_marr = 0.0;
    for k in 1..=clusters + 1 {
        for probe in probes.iter() {
            let small = clustering.select_top_clusters(&probe.values, k).unwrap();
            let big = clustering.select_top_clusters(&probe.values, k + 1).unwrap();
            assert!(
                small.iter().all(|s| big.binary_search(s).is_ok()),
                "top-{k} selection must be a subset of top-{}",
                k + 1
            );
        }
        let marr = clustering.marr(&probes, k).unwrap();
        assert!(
            marr >= previous_marr,
            "coverage ceiling fell from {previous_marr} to {marr} at k={k}"
        );
        previous_marr = marr;
    }
    assert_eq!(
        clustering.marr(&probes, clusters).unwrap(),
        1.0,
        "selecting every cluster keeps every enrolled subject reachable"
    );
}

#[test]
fn roc_rates_are_monotone_and_bounded() {
    for seed in 0..8u64 {
        let mut rng = ChaCha12Rng::seed_from_u64(seed.wrapping_mul(13));
        let ranking = vec![("t".to_string(), 1.0), ("f".to_string(), 0.5)];
        let flipped = vec![("f".to_string(), 1.0), ("t".to_string(), 0.5)];
        let knowns: Vec<ProbeResult<f64>> = (0..rng.random_range(1..=20))
            .map(|i| ProbeResult {
                sample_id: format!("k{i}"),
                true_subject: "t".to_string(),
                ranking: if rng.random_bool(0.7) { ranking.clone() } else { flipped.clone() },
                ratio: rng.random_range(0.0..3.0),
            })
            .collect();
        let unknowns: Vec<ProbeResult<f64>> = (0..rng.random_range(1..=20))
            .map(|i| ProbeResult {
                sample_id: format!("u{i}"),
                true_subject: "?".to_string(),
                ranking: ranking.clone(),
                ratio: rng.random_range(0.0..3.0),
            })
            .collect();

        let curve = dir_far_curve(&knowns, &unknowns, &ThresholdSweep::Observed).unwrap();
        let rank1_accuracy =
            knowns.iter().filter(|k| k.rank1_correct()).count() as f64 / knowns.len() as f64;
        for point in &curve {
            assert!((0.0..=1.0).contains(&point.far));
            assert!((0.0..=1.0).contains(&point.dir));
            assert!(
                point.dir <= rank1_accuracy + 1e-12,
                "DIR can never beat closed-set rank-1 accuracy"
            );
        }
        for w in curve.windows(2) {
            assert!(w[0].tau >= w[1].tau);
            assert!(w[0].far <= w[1].far);
            assert!(w[0].dir <= w[1].dir);
        }
        let area = roc_auc(&curve).unwrap();
        assert!((0.0..=1.0).contains(&area), "seed {seed}: AUC {area}");
    }
}
