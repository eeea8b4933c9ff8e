//! Closed- and open-set evaluation: CMC curves, the DIR-vs-FAR open-set ROC,
//! AUC, operating-point lookup, and report assembly.
//!
//! Inputs are per-probe results carrying the full candidate ranking and the
//! detection ratio. Known probes (enrolled true subject) feed the CMC curve
//! and the DIR numerator; unknown probes (true subject `"?"`) feed the FAR.
//! The ROC sweeps every distinct observed ratio, yielding the exact
//! step-function curve with no discretization error.

use std::collections::BTreeMap;
use std::path::Path;

use crate::dataset::{atomic_write, FeatureVector, UNKNOWN_SUBJECT};
use crate::ensemble::Ranking;
use crate::error::{Error, Result};
use crate::openset::{ratio_serde, Decision};
use crate::scalar::Real;

/// Default number of CMC ranks reported.
pub const DEFAULT_CMC_RANKS: usize = 20;

/// One evaluated probe: its true label, how it ranked, and its ratio.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(bound = "F: Real")]
pub struct ProbeResult<F> {
    pub sample_id: String,
    /// Enrolled subject id, or `"?"` for a probe outside the gallery.
    pub true_subject: String,
    /// Full candidate ranking over the gallery, best first.
    pub ranking: Ranking<F>,
    #[serde(with = "ratio_serde")]
    pub ratio: F,
}

impl<F: Real> ProbeResult<F> {
    /// Pair a probe's label with the decision it received.
    pub fn from_decision(probe: &FeatureVector<F>, decision: &Decision<F>) -> Self {
        Self {
            sample_id: probe.sample_id.clone(),
            true_subject: probe.subject_id.clone(),
            ranking: decision.ranking.clone(),
            ratio: decision.ratio,
        }
    }

    /// Whether this probe's subject is outside the gallery.
    pub fn is_unknown(&self) -> bool {
        self.true_subject == UNKNOWN_SUBJECT
    }

    /// 1-based position of the true subject in the ranking; `None` for
    /// unknown probes or a ranking that omits the subject.
    pub fn rank_of_true(&self) -> Option<usize> {
        if self.is_unknown() {
            return None;
        }
        self.ranking
            .iter()
            .position(|(s, _)| *s == self.true_subject)
            .map(|p| p + 1)
    }

    /// Whether the top-ranked candidate is the true subject.
    pub fn rank1_correct(&self) -> bool {
        self.rank_of_true() == Some(1)
    }
}

/// Cumulative match characteristic over known probes.
///
/// Entry `r-1` is the fraction of probes whose true subject appears within
/// the top `r` ranking positions, for `r = 1..=max_rank`.
pub fn cmc<F: Real>(results: &[ProbeResult<F>], max_rank: usize) -> Result<Vec<f64>> {
    if results.is_empty() {
        return Err(Error::Empty("known probe results"));
    }
    if max_rank == 0 {
        return Err(Error::InvalidParam("max_rank must be at least 1".into()));
    }
    let mut hits = vec![0usize; max_rank];
    for result in results {
        if result.is_unknown() {
            return Err(Error::InvalidData(format!(
                "probe {} is unknown-labeled; the CMC is defined over known probes",
                result.sample_id
            )));
        }
        let rank = result.rank_of_true().ok_or_else(|| {
            Error::InvalidData(format!(
                "probe {}: true subject {} absent from its ranking",
                result.sample_id, result.true_subject
            ))
        })?;
        if rank <= max_rank {
            hits[rank - 1] += 1;
        }
    }
    let n = results.len() as f64;
    let mut curve = Vec::with_capacity(max_rank);
    let mut cumulative = 0usize;
    for h in hits {
        cumulative += h;
        curve.push(cumulative as f64 / n);
    }
    Ok(curve)
}

/// One operating point of the open-set ROC.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RocPoint {
    /// The threshold producing this point (may be `+inf`).
    #[serde(with = "ratio_serde")]
    pub tau: f64,
    /// False alarm rate: fraction of unknown probes with ratio ≥ τ.
    pub far: f64,
    /// Detection-and-identification rate: fraction of known probes ranked
    /// correctly at position 1 with ratio ≥ τ.
    pub dir: f64,
}

/// Which thresholds the ROC sweeps.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum ThresholdSweep {
    /// Every distinct observed ratio plus the `0` and `+inf` endpoints —
    /// the exact step-function curve.
    #[default]
    Observed,
    /// A caller-supplied threshold list.
    Explicit(Vec<f64>),
}

/// Sweep thresholds over known and unknown probe results to produce the
/// open-set ROC, emitted with FAR ascending (thresholds descending).
pub fn dir_far_curve<F: Real>(
    knowns: &[ProbeResult<F>],
    unknowns: &[ProbeResult<F>],
    sweep: &ThresholdSweep,
) -> Result<Vec<RocPoint>> {
    if knowns.is_empty() {
        return Err(Error::Empty("known probe results"));
    }
    if unknowns.is_empty() {
        return Err(Error::Empty("unknown probe results"));
    }
    let mut known_stats = Vec::with_capacity(knowns.len());
    for result in knowns {
        if result.is_unknown() {
            return Err(Error::InvalidData(format!(
                "probe {} is unknown-labeled but was passed as a known result",
                result.sample_id
            )));
        }
        let ratio = result.ratio.to_f64_lossless();
        if ratio.is_nan() {
            return Err(Error::InvalidData(format!(
                "probe {} has a NaN ratio",
                result.sample_id
            )));
        }
        known_stats.push((ratio, result.rank1_correct()));
    }
    let mut unknown_ratios = Vec::with_capacity(unknowns.len());
    for result in unknowns {
        let ratio = result.ratio.to_f64_lossless();
        if ratio.is_nan() {
            return Err(Error::InvalidData(format!(
                "probe {} has a NaN ratio",
                result.sample_id
            )));
        }
        unknown_ratios.push(ratio);
    }

    let mut taus: Vec<f64> = match sweep {
        ThresholdSweep::Observed => {
            let mut t: Vec<f64> = known_stats
                .iter()
                .map(|(r, _)| *r)
                .chain(unknown_ratios.iter().copied())
                .chain([0.0, f64::INFINITY])
                .collect();
            t.sort_by(|a, b| a.partial_cmp(b).expect("NaN ratios rejected above"));
            t.dedup();
            t
        }
        ThresholdSweep::Explicit(list) => {
            if list.is_empty() {
                return Err(Error::Empty("threshold sweep"));
            }
            if list.iter().any(|t| t.is_nan()) {
                return Err(Error::InvalidParam("NaN threshold in sweep".into()));
            }
            let mut t = list.clone();
            t.sort_by(|a, b| a.partial_cmp(b).expect("checked for NaN"));
            t.dedup();
            t
        }
    };
    taus.reverse();

    let n_known = knowns.len() as f64;
    let n_unknown = unknowns.len() as f64;
    Ok(taus
        .into_iter()
        .map(|tau| {
            let dir = known_stats
                .iter()
                .filter(|(ratio, correct)| *correct && *ratio >= tau)
                .count() as f64
                / n_known;
            let far = unknown_ratios.iter().filter(|&&r| r >= tau).count() as f64
                / n_unknown;
            RocPoint { tau, far, dir }
        })
        .collect())
}

fn validate_curve(points: &[(f64, f64)]) -> Result<()> {
    for &(x, _) in points {
        if x.is_nan() || !(0.0..=1.0).contains(&x) {
            return Err(Error::InvalidData(format!(
                "curve x value {x} outside [0, 1]"
            )));
        }
    }
    if let Some(w) = points.windows(2).find(|w| w[1].0 < w[0].0) {
        return Err(Error::InvalidData(format!(
            "curve x values must be non-decreasing, got {} after {}",
            w[1].0, w[0].0
        )));
    }
    Ok(())
}

/// Trapezoidal area under a curve over x ∈ [0, 1].
///
/// Endpoints are extended by constant extrapolation to x = 0 and x = 1, so
/// partial curves integrate over the full unit interval.
pub fn auc(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::InvalidParam(format!(
            "need at least 2 curve points, got {}",
            points.len()
        )));
    }
    validate_curve(points)?;
    let first = points[0];
    let last = points[points.len() - 1];
    let mut area = first.1 * first.0 + last.1 * (1.0 - last.0);
    for w in points.windows(2) {
        area += (w[0].1 + w[1].1) / 2.0 * (w[1].0 - w[0].0);
    }
    Ok(area)
}

/// AUC of an open-set ROC (DIR integrated over FAR).
pub fn roc_auc(curve: &[RocPoint]) -> Result<f64> {
    let points: Vec<(f64, f64)> = curve.iter().map(|p| (p.far, p.dir)).collect();
    auc(&points)
}

/// DIR at one requested FAR operating point, linearly interpolated.
///
/// An exact FAR hit returns that point's DIR (the best one, if several
/// thresholds share the FAR); targets outside the curve's FAR span take the
/// nearest endpoint's DIR.
pub fn dir_at_far(curve: &[RocPoint], target: f64) -> Result<f64> {
    if target.is_nan() || !(0.0..=1.0).contains(&target) {
        return Err(Error::InvalidParam(format!(
            "FAR target {target} outside [0, 1]"
        )));
    }
    if curve.is_empty() {
        return Err(Error::Empty("ROC curve"));
    }
    let points: Vec<(f64, f64)> = curve.iter().map(|p| (p.far, p.dir)).collect();
    validate_curve(&points)?;

    let exact = points
        .iter()
        .filter(|(x, _)| *x == target)
        .map(|(_, y)| *y)
        .fold(f64::NEG_INFINITY, f64::max);
    if exact.is_finite() {
        return Ok(exact);
    }
    if target < points[0].0 {
        return Ok(points[0].1);
    }
    if target > points[points.len() - 1].0 {
        return Ok(points[points.len() - 1].1);
    }
    let below = points
        .iter()
        .rev()
        .find(|(x, _)| *x < target)
        .expect("target above first point");
    let above = points
        .iter()
        .find(|(x, _)| *x > target)
        .expect("target below last point");
    let t = (target - below.0) / (above.0 - below.0);
    Ok(below.1 + (above.1 - below.1) * t)
}

/// The assembled evaluation: closed-set CMC, open-set ROC, and summaries.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvaluationReport {
    pub num_known_probes: usize,
    pub num_unknown_probes: usize,
    /// (rank, cumulative accuracy) for ranks 1..=R.
    pub cmc: Vec<(usize, f64)>,
    /// DIR-vs-FAR over the threshold sweep, FAR ascending (this is the curve
    /// the `auc` field integrates).
    pub open_set_roc: Vec<RocPoint>,
    pub auc: f64,
    /// Requested FAR operating points → interpolated DIR.
    pub dir_at_far: BTreeMap<String, f64>,
    /// Fraction of known probes whose true subject survives cluster
    /// selection — the ceiling on recognition — when a clustering was used.
    pub marr: Option<f64>,
    /// Echo of the configuration and seeds that produced the results.
    pub config: serde_json::Value,
}

/// Partition results by label and assemble the full report.
pub fn evaluate<F: Real>(
    results: &[ProbeResult<F>],
    max_rank: usize,
    far_targets: &[f64],
    marr: Option<f64>,
    config: serde_json::Value,
) -> Result<EvaluationReport> {
    let knowns: Vec<ProbeResult<F>> =
        results.iter().filter(|r| !r.is_unknown()).cloned().collect();
    let unknowns: Vec<ProbeResult<F>> =
        results.iter().filter(|r| r.is_unknown()).cloned().collect();
    let cmc_curve = cmc(&knowns, max_rank)?;
    let roc = dir_far_curve(&knowns, &unknowns, &ThresholdSweep::Observed)?;
    let auc_value = roc_auc(&roc)?;
    let mut operating_points = BTreeMap::new();
    for &target in far_targets {
        operating_points.insert(format!("{target}"), dir_at_far(&roc, target)?);
    }
    Ok(EvaluationReport {
        num_known_probes: knowns.len(),
        num_unknown_probes: unknowns.len(),
        cmc: cmc_curve.into_iter().zip(1..).map(|(a, r)| (r, a)).collect(),
        open_set_roc: roc,
        auc: auc_value,
        dir_at_far: operating_points,
        marr,
        config,
    })
}

impl EvaluationReport {
    /// Write the full report as deterministic pretty JSON.
    pub fn save_json(&self, path: &Path) -> Result<()> {
        atomic_write(path, |out| {
            serde_json::to_writer_pretty(&mut *out, self)?;
            use std::io::Write;
            out.write_all(b"\n")?;
            Ok(())
        })
    }

    /// Write the CMC curve as flat `rank,accuracy` CSV.
    pub fn save_cmc_csv(&self, path: &Path) -> Result<()> {
        atomic_write(path, |out| {
            use std::io::Write;
            writeln!(out, "rank,accuracy")?;
            for (rank, accuracy) in &self.cmc {
                writeln!(out, "{rank},{accuracy}")?;
            }
            Ok(())
        })
    }

    /// Write the open-set ROC as flat `far,dir` CSV.
    pub fn save_roc_csv(&self, path: &Path) -> Result<()> {
        atomic_write(path, |out| {
            use std::io::Write;
            writeln!(out, "far,dir")?;
            for point in &self.open_set_roc {
                writeln!(out, "{},{}", point.far, point.dir)?;
            }
            Ok(())
        })
    }
}
