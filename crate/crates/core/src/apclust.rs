//! Affinity propagation clustering over subject centroids, plus per-probe
//! cluster shortlisting and the MARR (maximum achievable recognition rate)
//! diagnostic.
//!
//! Clustering runs the classic responsibility/availability message-passing
//! scheme on a dense similarity matrix whose diagonal holds the preference
//! values. It elects a set of exemplars (cluster representatives drawn from
//! the data itself) and assigns every point to its most similar exemplar.
//! At query time, [`Clustering::select_top_clusters`] shortlists the subjects
//! belonging to the `k` clusters whose exemplars most resemble the probe.

use std::path::Path;

use ndarray::Array2;

use crate::dataset::{atomic_write, CentroidSet, ProbeSet};
use crate::error::{Error, Result};
use crate::scalar::{real, Real};

/// Similarity measure between feature vectors (higher = more alike).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Negative squared Euclidean distance; maximum 0 at identical points.
    NegSqEuclid,
    /// Cosine similarity; zero-norm vectors compare as 0.
    Cosine,
}

impl Metric {
    /// Similarity between two equal-length vectors.
    pub fn similarity<F: Real>(self, a: &[F], b: &[F]) -> F {
        match self {
            Metric::NegSqEuclid => {
                let mut acc = F::zero();
                for (&x, &y) in a.iter().zip(b) {
                    let d = x - y;
                    acc += d * d;
                }
                -acc
            }
            Metric::Cosine => {
                let mut dot = F::zero();
                let mut na = F::zero();
                let mut nb = F::zero();
                for (&x, &y) in a.iter().zip(b) {
                    dot += x * y;
                    na += x * x;
                    nb += y * y;
                }
                if na > F::zero() && nb > F::zero() {
                    dot / (na.sqrt() * nb.sqrt())
                } else {
                    F::zero()
                }
            }
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Metric::NegSqEuclid => "neg_sq_euclid",
            Metric::Cosine => "cosine",
        })
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "neg_sq_euclid" => Ok(Metric::NegSqEuclid),
            "cosine" => Ok(Metric::Cosine),
            other => Err(Error::InvalidParam(format!(
                "unknown metric {other:?} (expected neg_sq_euclid or cosine)"
            ))),
        }
    }
}

/// How the similarity-matrix diagonal (the exemplar preference) is chosen.
///
/// `Median` and `Min` are statistics over the off-diagonal similarities;
/// lower preferences yield fewer clusters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preference {
    Median,
    Min,
    Fixed(f64),
}

impl Preference {
    /// Resolve to a concrete value given the off-diagonal similarities.
    fn resolve<F: Real>(self, off_diagonal: &[F]) -> F {
        match self {
            Preference::Fixed(v) => real::<F>(v),
            Preference::Min => off_diagonal
                .iter()
                .copied()
                .fold(None, |acc: Option<F>, v| {
                    Some(acc.map_or(v, |a| a.min(v)))
                })
                .unwrap_or_else(F::zero),
            Preference::Median => {
                if off_diagonal.is_empty() {
                    return F::zero();
                }
                let mut sorted = off_diagonal.to_vec();
                sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite similarities"));
                let mid = sorted.len() / 2;
                if sorted.len() % 2 == 1 {
                    sorted[mid]
                } else {
                    (sorted[mid - 1] + sorted[mid]) / real::<F>(2.0)
                }
            }
        }
    }
}

impl std::fmt::Display for Preference {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Preference::Median => f.write_str("median"),
            Preference::Min => f.write_str("min"),
            Preference::Fixed(v) => write!(f, "fixed:{v}"),
        }
    }
}

impl std::str::FromStr for Preference {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "median" => Ok(Preference::Median),
            "min" => Ok(Preference::Min),
            other => {
                if let Some(value) = other.strip_prefix("fixed:") {
                    let v: f64 = value.parse().map_err(|_| {
                        Error::InvalidParam(format!("bad fixed preference {value:?}"))
                    })?;
                    if !v.is_finite() {
                        return Err(Error::InvalidParam(
                            "fixed preference must be finite".into(),
                        ));
                    }
                    Ok(Preference::Fixed(v))
                } else {
                    Err(Error::InvalidParam(format!(
                        "unknown preference {other:?} (expected median, min or fixed:<value>)"
                    )))
                }
            }
        }
    }
}

/// Dense pairwise similarities; the diagonal holds the preferences.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix<F> {
    values: Array2<F>,
}

impl<F: Real> SimilarityMatrix<F> {
    /// Wrap a precomputed square matrix.
    pub fn from_values(values: Array2<F>) -> Result<Self> {
        if values.nrows() != values.ncols() {
            return Err(Error::InvalidData(format!(
                "similarity matrix must be square, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData(
                "similarity matrix contains a non-finite entry".into(),
            ));
        }
        Ok(Self { values })
    }

    pub fn size(&self) -> usize {
        self.values.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> F {
        self.values[[i, j]]
    }

    pub fn values(&self) -> &Array2<F> {
        &self.values
    }
}

/// Build the similarity matrix for a point set and fill its diagonal with the
/// chosen preference statistic (computed over the off-diagonal entries).
pub fn pairwise_similarity<F: Real>(
    points: &[Vec<F>],
    metric: Metric,
    preference: Preference,
) -> Result<SimilarityMatrix<F>> {
    if points.is_empty() {
        return Err(Error::Empty("no points to compare"));
    }
    let m = points.len();
    let dim = points[0].len();
    for p in points {
        if p.len() != dim {
            return Err(Error::DimMismatch {
                expected: dim,
                got: p.len(),
            });
        }
    }
    let mut values = Array2::zeros((m, m));
    let mut off_diagonal = Vec::with_capacity(m * m.saturating_sub(1));
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            let s = metric.similarity(&points[i], &points[j]);
            values[[i, j]] = s;
            off_diagonal.push(s);
        }
    }
    let p = preference.resolve(&off_diagonal);
    for i in 0..m {
        values[[i, i]] = p;
    }
    SimilarityMatrix::from_values(values)
}

/// Knobs for the message-passing loop.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ApOptions {
    /// Damping factor λ in [0.5, 1): new = λ·old + (1−λ)·computed.
    pub damping: f64,
    pub max_iter: usize,
    /// Stop once the exemplar set has stayed unchanged this many iterations.
    pub convergence_iter: usize,
}

impl Default for ApOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            max_iter: 200,
            convergence_iter: 15,
        }
    }
}

/// Raw affinity-propagation output over matrix indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApOutcome {
    /// Indices of the elected exemplars, ascending.
    pub exemplars: Vec<usize>,
    /// Per point, the position (into `exemplars`) of its cluster.
    pub assignment: Vec<usize>,
    pub iterations_run: usize,
    /// False when max_iter was reached, or no point passed the exemplar test.
    pub converged: bool,
}

/// Run affinity propagation on a similarity matrix.
///
/// Message updates follow the standard responsibility/availability rules with
/// damping on both arrays. The loop stops once the exemplar set — the points
/// `k` with `a(k,k) + r(k,k) > 0` — stays unchanged for
/// `convergence_iter` consecutive iterations, or at `max_iter`. If no point
/// ever passes the exemplar test, the single point maximizing `a + r` is
/// elected and the result is flagged unconverged.
pub fn affinity_propagation<F: Real>(
    s: &SimilarityMatrix<F>,
    options: &ApOptions,
) -> Result<ApOutcome> {
    if !(0.5..1.0).contains(&options.damping) {
        return Err(Error::InvalidParam(format!(
            "damping must lie in [0.5, 1), got {}",
            options.damping
        )));
    }
    if options.max_iter == 0 || options.convergence_iter == 0 {
        return Err(Error::InvalidParam(
            "max_iter and convergence_iter must be positive".into(),
        ));
    }

    let m = s.size();
    if m == 1 {
        return Ok(ApOutcome {
            exemplars: vec![0],
            assignment: vec![0],
            iterations_run: 0,
            converged: true,
        });
    }

    let lambda = real::<F>(options.damping);
    let keep = F::one() - lambda;
    let sim = s.values();
    let mut r: Array2<F> = Array2::zeros((m, m));
    let mut a: Array2<F> = Array2::zeros((m, m));

    let mut current: Vec<usize> = Vec::new();
    let mut streak = 0usize;
    let mut iterations_run = 0usize;
    let mut converged = false;

    for _ in 0..options.max_iter {
        iterations_run += 1;

        // Responsibilities: r(i,k) = s(i,k) − max_{k'≠k} [a(i,k') + s(i,k')].
        // The row maximum and runner-up give every k its competing maximum.
        for i in 0..m {
            let mut best = F::neg_infinity();
            let mut second = F::neg_infinity();
            let mut best_k = 0usize;
            for k in 0..m {
                let v = a[[i, k]] + sim[[i, k]];
                if v > best {
                    second = best;
                    best = v;
                    best_k = k;
                } else if v > second {
                    second = v;
                }
            }
            for k in 0..m {
                let competing = if k == best_k { second } else { best };
                let fresh = sim[[i, k]] - competing;
                r[[i, k]] = lambda * r[[i, k]] + keep * fresh;
            }
        }

        // Availabilities: a(i,k) = min(0, r(k,k) + Σ_{i'∉{i,k}} max(0, r(i',k)))
        // off-diagonal, and a(k,k) = Σ_{i'≠k} max(0, r(i',k)).
        for k in 0..m {
            let mut positive_sum = F::zero();
            for i in 0..m {
                if i != k {
                    positive_sum += r[[i, k]].max(F::zero());
                }
            }
            for i in 0..m {
                let fresh = if i == k {
                    positive_sum
                } else {
                    let without_i = positive_sum - r[[i, k]].max(F::zero());
                    (r[[k, k]] + without_i).min(F::zero())
                };
                a[[i, k]] = lambda * a[[i, k]] + keep * fresh;
            }
        }

        let exemplars: Vec<usize> = (0..m)
            .filter(|&k| a[[k, k]] + r[[k, k]] > F::zero())
            .collect();
        if !exemplars.is_empty() && exemplars == current {
            streak += 1;
            if streak >= options.convergence_iter {
                converged = true;
                break;
            }
        } else {
            streak = usize::from(!exemplars.is_empty());
            current = exemplars;
        }
    }

    let mut exemplars = if current.is_empty() {
        // Pathological preferences: elect the single best-evidence point.
        let mut best_k = 0;
        let mut best_v = F::neg_infinity();
        for k in 0..m {
            let v = a[[k, k]] + r[[k, k]];
            if v > best_v {
                best_v = v;
                best_k = k;
            }
        }
        converged = false;
        vec![best_k]
    } else {
        current
    };

    // Points with identical similarity rows are indistinguishable to the
    // message passing and can be elected jointly by symmetry; keep only the
    // lowest-index representative so co-located duplicates stay together.
    exemplars = dedup_identical_rows(sim, exemplars);

    // Provisional assignment, then the customary medoid refinement: within
    // each cluster, re-elect the member maximizing total similarity to the
    // cluster, and reassign against the refined exemplars.
    let provisional = assign_points(sim, &exemplars);
    let mut refined: Vec<usize> = exemplars
        .iter()
        .enumerate()
        .map(|(pos, _)| {
            let members: Vec<usize> = provisional
                .iter()
                .enumerate()
                .filter(|&(_, &c)| c == pos)
                .map(|(i, _)| i)
                .collect();
            let mut best = members[0];
            let mut best_total = F::neg_infinity();
            for &j in &members {
                let total = members
                    .iter()
                    .map(|&i| sim[[i, j]])
                    .fold(F::zero(), |acc, v| acc + v);
                if total > best_total {
                    best_total = total;
                    best = j;
                }
            }
            best
        })
        .collect();
    refined.sort_unstable();
    let assignment = assign_points(sim, &refined);

    Ok(ApOutcome {
        exemplars: refined,
        assignment,
        iterations_run,
        converged,
    })
}

/// Drop exemplars whose similarity rows duplicate an earlier exemplar's.
fn dedup_identical_rows<F: Real>(sim: &Array2<F>, exemplars: Vec<usize>) -> Vec<usize> {
    let m = sim.nrows();
    let mut kept: Vec<usize> = Vec::with_capacity(exemplars.len());
    for &e in &exemplars {
        let duplicate = kept.iter().any(|&k| {
            (0..m)
                .filter(|&c| c != e && c != k)
                .all(|c| sim[[e, c]] == sim[[k, c]])
                && sim[[e, k]] == sim[[k, e]]
        });
        if !duplicate {
            kept.push(e);
        }
    }
    kept
}

/// Assign each point to its most similar exemplar (ties: lowest exemplar
/// index); exemplars always belong to their own cluster.
fn assign_points<F: Real>(sim: &Array2<F>, exemplars: &[usize]) -> Vec<usize> {
    let m = sim.nrows();
    let mut assignment = vec![0usize; m];
    for i in 0..m {
        if let Some(pos) = exemplars.iter().position(|&e| e == i) {
            assignment[i] = pos;
            continue;
        }
        let mut best_pos = 0usize;
        let mut best_sim = F::neg_infinity();
        for (pos, &e) in exemplars.iter().enumerate() {
            let v = sim[[i, e]];
            if v > best_sim {
                best_sim = v;
                best_pos = pos;
            }
        }
        assignment[i] = best_pos;
    }
    assignment
}

/// Full clustering configuration, echoed into the serialized artifact.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ClusterParams {
    pub metric: Metric,
    pub preference: Preference,
    pub damping: f64,
    pub max_iter: usize,
    pub convergence_iter: usize,
    /// Whether the clustered vectors were L2-normalized beforehand; recorded
    /// so downstream steps can verify they preprocess probes identically.
    pub l2_normalized: bool,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            metric: Metric::NegSqEuclid,
            preference: Preference::Median,
            damping: 0.5,
            max_iter: 200,
            convergence_iter: 15,
            l2_normalized: false,
        }
    }
}

/// A finished clustering of subject centroids, serializable for reuse.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Clustering<F> {
    /// The clustered points with their subject ids.
    pub points: CentroidSet<F>,
    /// Indices (into `points`) of the exemplars, ascending.
    pub exemplars: Vec<usize>,
    /// Per point, the position (into `exemplars`) of its cluster.
    pub assignment: Vec<usize>,
    pub iterations_run: usize,
    pub converged: bool,
    pub params: ClusterParams,
}

/// Cluster a centroid set: build similarities, run affinity propagation, and
/// package the outcome with the points and parameters.
pub fn cluster_centroids<F: Real>(
    points: CentroidSet<F>,
    params: &ClusterParams,
) -> Result<Clustering<F>> {
    let similarity = pairwise_similarity(&points.points, params.metric, params.preference)?;
    let options = ApOptions {
        damping: params.damping,
        max_iter: params.max_iter,
        convergence_iter: params.convergence_iter,
    };
    let outcome = affinity_propagation(&similarity, &options)?;
    if !outcome.converged {
        log::warn!(
            "affinity propagation did not converge after {} iterations \
             ({} exemplars at termination)",
            outcome.iterations_run,
            outcome.exemplars.len()
        );
    }
    Ok(Clustering {
        points,
        exemplars: outcome.exemplars,
        assignment: outcome.assignment,
        iterations_run: outcome.iterations_run,
        converged: outcome.converged,
        params: params.clone(),
    })
}

impl<F: Real> Clustering<F> {
    pub fn num_clusters(&self) -> usize {
        self.exemplars.len()
    }

    /// Subject ids of one cluster, in ascending point order.
    pub fn members(&self, cluster: usize) -> Vec<&str> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|&(_, &c)| c == cluster)
            .map(|(i, _)| self.points.subject_ids[i].as_str())
            .collect()
    }

    /// Subject ids of the exemplars, in cluster order.
    pub fn exemplar_subjects(&self) -> Vec<&str> {
        self.exemplars
            .iter()
            .map(|&e| self.points.subject_ids[e].as_str())
            .collect()
    }

    /// Union of the subjects in the `k` clusters whose exemplars are most
    /// similar to the probe, as a sorted id list. Ties between equally
    /// similar exemplars break toward the lower exemplar index.
    pub fn select_top_clusters(&self, probe: &[F], k: usize) -> Result<Vec<String>> {
        if k == 0 {
            return Err(Error::InvalidParam("k must be positive".into()));
        }
        if probe.len() != self.points.dim() {
            return Err(Error::DimMismatch {
                expected: self.points.dim(),
                got: probe.len(),
            });
        }
        let mut ranked: Vec<(usize, F)> = self
            .exemplars
            .iter()
            .enumerate()
            .map(|(pos, &e)| {
                (
                    pos,
                    self.params
                        .metric
                        .similarity(probe, &self.points.points[e]),
                )
            })
            .collect();
        ranked.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .expect("finite similarities")
                .then(a.0.cmp(&b.0))
        });
        let take = k.min(ranked.len());
        let mut subjects: Vec<String> = Vec::new();
        for &(cluster, _) in ranked.iter().take(take) {
            for (i, &c) in self.assignment.iter().enumerate() {
                if c == cluster {
                    subjects.push(self.points.subject_ids[i].clone());
                }
            }
        }
        subjects.sort_unstable();
        Ok(subjects)
    }

    /// Fraction of known probes whose true subject survives top-`k` cluster
    /// selection — the ceiling on downstream identification accuracy.
    pub fn marr(&self, probes: &ProbeSet<F>, k: usize) -> Result<f64> {
        if probes.is_empty() {
            return Err(Error::Empty("no probes for the MARR computation"));
        }
        let mut hits = 0usize;
        for probe in probes.iter() {
            if probe.is_unknown() {
                return Err(Error::InvalidData(format!(
                    "probe {:?} has unknown identity; the recognition-rate \
                     bound is defined over known probes only",
                    probe.sample_id
                )));
            }
            if !self
                .points
                .subject_ids.contains(&probe.subject_id)
            {
                return Err(Error::UnknownSubject(probe.subject_id.clone()));
            }
            let selected = self.select_top_clusters(&probe.values, k)?;
            if selected.binary_search(&probe.subject_id).is_ok() {
                hits += 1;
            }
        }
        Ok(hits as f64 / probes.len() as f64)
    }

    /// Write the clustering as a deterministic JSON artifact.
    pub fn save(&self, path: &Path) -> Result<()> {
        atomic_write(path, |out| {
            serde_json::to_writer_pretty(&mut *out, self)?;
            use std::io::Write;
            out.write_all(b"\n")?;
            Ok(())
        })
    }

    /// Load a clustering previously written by [`Clustering::save`].
    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| {
            Error::InvalidData(format!("cannot open {}: {e}", path.display()))
        })?;
        let clustering: Self = serde_json::from_reader(std::io::BufReader::new(file))?;
        if clustering.assignment.len() != clustering.points.len()
            || clustering
                .assignment
                .iter()
                .any(|&c| c >= clustering.exemplars.len())
            || clustering
                .exemplars
                .iter()
                .any(|&e| e >= clustering.points.len())
        {
            return Err(Error::InvalidData(format!(
                "inconsistent clustering artifact {}",
                path.display()
            )));
        }
        Ok(clustering)
    }
}
