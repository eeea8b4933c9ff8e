//! Labeled feature-vector datasets: galleries of enrolled subjects and probe
//! sets presented at query time.
//!
//! A dataset is a flat list of [`FeatureVector`] records. A [`Gallery`] groups
//! them by subject and is the enrolled universe `S_t`; a [`ProbeSet`] is the
//! query-time side and may contain vectors of unknown identity (subject id
//! [`UNKNOWN_SUBJECT`]).

mod io;
mod protocol;
mod synth;

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::scalar::Real;

pub use io::{atomic_write, load_gallery, load_probes, save_gallery, save_probes, FileFormat};
pub use protocol::{split_protocol, ProtocolConfig, ProtocolSplit, ProtocolStyle, SplitCounts};
pub use synth::{gen_synthetic, SynthConfig};

/// Reserved subject id marking a probe of unknown identity.
pub const UNKNOWN_SUBJECT: &str = "?";

/// One labeled sample: a dense real vector with a sample id and a subject id.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FeatureVector<F> {
    pub sample_id: String,
    pub subject_id: String,
    pub values: Vec<F>,
}

impl<F: Real> FeatureVector<F> {
    pub fn new(
        sample_id: impl Into<String>,
        subject_id: impl Into<String>,
        values: Vec<F>,
    ) -> Self {
        Self {
            sample_id: sample_id.into(),
            subject_id: subject_id.into(),
            values,
        }
    }

    /// True when the subject id is the reserved unknown literal.
    pub fn is_unknown(&self) -> bool {
        self.subject_id == UNKNOWN_SUBJECT
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Scale to unit Euclidean norm; the zero vector is left untouched.
    pub fn l2_normalize(&mut self) {
        let norm = self.values.iter().map(|v| *v * *v).sum::<F>().sqrt();
        if norm > F::zero() {
            for v in &mut self.values {
                *v /= norm;
            }
        }
    }
}

/// Subject-level representatives of a gallery: one point per subject, in
/// ascending subject-id order. This is the input to clustering.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CentroidSet<F> {
    pub subject_ids: Vec<String>,
    pub points: Vec<Vec<F>>,
}

impl<F: Real> CentroidSet<F> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }
}

/// The enrolled set `S_t`: subjects with their training samples.
///
/// Subjects are kept in ascending id order so every derived artifact
/// (centroids, rankings, serialized files) is deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct Gallery<F> {
    subjects: BTreeMap<String, Vec<FeatureVector<F>>>,
    dim: usize,
}

impl<F: Real> Gallery<F> {
    /// Build a gallery from raw records.
    ///
    /// Rejects the unknown-subject literal, fewer than two subjects, mixed
    /// dimensions, non-finite values and duplicate sample ids.
    pub fn from_records(records: Vec<FeatureVector<F>>) -> Result<Self> {
        let dim = validate_records(&records)?;
        let mut subjects: BTreeMap<String, Vec<FeatureVector<F>>> = BTreeMap::new();
        for rec in records {
            if rec.is_unknown() {
                return Err(Error::InvalidData(format!(
                    "gallery sample {:?} has the reserved unknown subject id",
                    rec.sample_id
                )));
            }
            subjects.entry(rec.subject_id.clone()).or_default().push(rec);
        }
        if subjects.len() < 2 {
            return Err(Error::InvalidData(format!(
                "gallery needs at least 2 subjects, got {}",
                subjects.len()
            )));
        }
        Ok(Self { subjects, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_subjects(&self) -> usize {
        self.subjects.len()
    }

    pub fn total_samples(&self) -> usize {
        self.subjects.values().map(Vec::len).sum()
    }

    /// Subject ids in ascending order.
    pub fn subject_ids(&self) -> Vec<String> {
        self.subjects.keys().cloned().collect()
    }

    pub fn contains_subject(&self, subject_id: &str) -> bool {
        self.subjects.contains_key(subject_id)
    }

    pub fn samples_of(&self, subject_id: &str) -> Result<&[FeatureVector<F>]> {
        self.subjects
            .get(subject_id)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownSubject(subject_id.to_string()))
    }

    /// Iterate `(subject_id, samples)` in ascending subject order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[FeatureVector<F>])> {
        self.subjects
            .iter()
            .map(|(id, samples)| (id.as_str(), samples.as_slice()))
    }

    /// Flatten to records in canonical order (by subject, then file order).
    pub fn to_records(&self) -> Vec<FeatureVector<F>> {
        self.subjects.values().flatten().cloned().collect()
    }

    /// Component-wise mean of the subject's samples.
    pub fn centroid(&self, subject_id: &str) -> Result<Vec<F>> {
        let samples = self.samples_of(subject_id)?;
        let n = F::from_usize(samples.len()).expect("sample count fits in Real");
        let mut mean = vec![F::zero(); self.dim];
        for sample in samples {
            for (acc, v) in mean.iter_mut().zip(&sample.values) {
                *acc += *v;
            }
        }
        for acc in &mut mean {
            *acc /= n;
        }
        Ok(mean)
    }

    /// One centroid per subject, ascending subject order.
    pub fn centroids(&self) -> CentroidSet<F> {
        let subject_ids = self.subject_ids();
        let points = subject_ids
            .iter()
            .map(|id| self.centroid(id).expect("subject present"))
            .collect();
        CentroidSet {
            subject_ids,
            points,
        }
    }

    /// Normalize every sample to unit norm in place.
    pub fn l2_normalize(&mut self) {
        for samples in self.subjects.values_mut() {
            for sample in samples {
                sample.l2_normalize();
            }
        }
    }
}

/// Query-time samples; identities may be unknown.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSet<F> {
    probes: Vec<FeatureVector<F>>,
    dim: usize,
}

impl<F: Real> ProbeSet<F> {
    pub fn from_records(records: Vec<FeatureVector<F>>) -> Result<Self> {
        let dim = validate_records(&records)?;
        Ok(Self {
            probes: records,
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.probes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probes.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, FeatureVector<F>> {
        self.probes.iter()
    }

    pub fn probes(&self) -> &[FeatureVector<F>] {
        &self.probes
    }

    pub fn to_records(&self) -> Vec<FeatureVector<F>> {
        self.probes.clone()
    }

    pub fn l2_normalize(&mut self) {
        for probe in &mut self.probes {
            probe.l2_normalize();
        }
    }
}

/// Shared record validation; returns the common dimension.
fn validate_records<F: Real>(records: &[FeatureVector<F>]) -> Result<usize> {
    let first = records.first().ok_or(Error::Empty("no feature records"))?;
    let dim = first.dim();
    if dim == 0 {
        return Err(Error::InvalidData(format!(
            "sample {:?} has no values",
            first.sample_id
        )));
    }
    let mut seen = std::collections::HashSet::with_capacity(records.len());
    for (idx, rec) in records.iter().enumerate() {
        if rec.sample_id.is_empty() || rec.subject_id.is_empty() {
            return Err(Error::InvalidData(format!(
                "record {} has an empty sample or subject id",
                idx + 1
            )));
        }
        if rec.dim() != dim {
            return Err(Error::DimMismatch {
                expected: dim,
                got: rec.dim(),
            });
        }
        if rec.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "sample {:?} contains a non-finite value",
                rec.sample_id
            )));
        }
        if !seen.insert(rec.sample_id.as_str()) {
            return Err(Error::InvalidData(format!(
                "duplicate sample id {:?}",
                rec.sample_id
            )));
        }
    }
    Ok(dim)
}
