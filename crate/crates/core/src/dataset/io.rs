//! Reading and writing feature-vector files.
//!
//! Two on-disk layouts are supported:
//!
//! * **CSV** — header-free rows `sample_id,subject_id,v1,...,vn`.
//! * **JSONL** — one JSON object per line:
//!   `{"sample_id":...,"subject_id":...,"values":[...]}`.
//!
//! All writes go through [`atomic_write`]: content lands in a sibling
//! temporary file that is renamed over the target, so readers never observe a
//! half-written file.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::{FeatureVector, Gallery, ProbeSet};

/// On-disk layout of a feature-vector file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileFormat {
    Csv,
    Jsonl,
}

impl FileFormat {
    /// Conventional file extension (without dot).
    pub fn extension(self) -> &'static str {
        match self {
            FileFormat::Csv => "csv",
            FileFormat::Jsonl => "jsonl",
        }
    }
}

impl fmt::Display for FileFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

impl FromStr for FileFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(FileFormat::Csv),
            "jsonl" => Ok(FileFormat::Jsonl),
            other => Err(Error::InvalidParam(format!(
                "unknown format {other:?} (expected \"csv\" or \"jsonl\")"
            ))),
        }
    }
}

/// Load and validate a gallery file.
pub fn load_gallery<F: Real>(path: &Path, format: FileFormat) -> Result<Gallery<F>> {
    Gallery::from_records(load_records(path, format)?)
}

/// Load and validate a probe file.
pub fn load_probes<F: Real>(path: &Path, format: FileFormat) -> Result<ProbeSet<F>> {
    ProbeSet::from_records(load_records(path, format)?)
}

/// Write a gallery in canonical order (by subject id, then file order).
pub fn save_gallery<F: Real>(path: &Path, format: FileFormat, gallery: &Gallery<F>) -> Result<()> {
    save_records(path, format, &gallery.to_records())
}

/// Write a probe set in its stored order.
pub fn save_probes<F: Real>(path: &Path, format: FileFormat, probes: &ProbeSet<F>) -> Result<()> {
    save_records(path, format, probes.probes())
}

fn load_records<F: Real>(path: &Path, format: FileFormat) -> Result<Vec<FeatureVector<F>>> {
    let file = File::open(path).map_err(|e| {
        Error::InvalidData(format!("cannot open {}: {e}", path.display()))
    })?;
    let reader = BufReader::new(file);
    match format {
        FileFormat::Csv => read_csv(path, reader),
        FileFormat::Jsonl => read_jsonl(path, reader),
    }
}

fn read_csv<F: Real>(path: &Path, reader: impl std::io::Read) -> Result<Vec<FeatureVector<F>>> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = Vec::new();
    for (idx, row) in csv_reader.records().enumerate() {
        let line = idx + 1;
        let row = row.map_err(|e| parse_error(path, line, e.to_string()))?;
        if row.len() < 3 {
            return Err(parse_error(
                path,
                line,
                format!("expected sample_id,subject_id,v1,... got {} fields", row.len()),
            ));
        }
        let mut values = Vec::with_capacity(row.len() - 2);
        for field in row.iter().skip(2) {
            let value = F::from_str(field.trim()).map_err(|_| {
                parse_error(path, line, format!("invalid float literal {field:?}"))
            })?;
            values.push(value);
        }
        records.push(FeatureVector::new(&row[0], &row[1], values));
    }
    Ok(records)
}

fn read_jsonl<F: Real>(path: &Path, reader: impl BufRead) -> Result<Vec<FeatureVector<F>>> {
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| parse_error(path, line_no, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: FeatureVector<F> = serde_json::from_str(&line)
            .map_err(|e| parse_error(path, line_no, e.to_string()))?;
        records.push(record);
    }
    Ok(records)
}

fn save_records<F: Real>(
    path: &Path,
    format: FileFormat,
    records: &[FeatureVector<F>],
) -> Result<()> {
    atomic_write(path, |out| match format {
        FileFormat::Csv => write_csv(out, records),
        FileFormat::Jsonl => write_jsonl(out, records),
    })
}

fn write_csv<F: Real>(out: &mut dyn Write, records: &[FeatureVector<F>]) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_writer(out);
    for rec in records {
        writer.write_field(&rec.sample_id)?;
        writer.write_field(&rec.subject_id)?;
        for v in &rec.values {
            writer.write_field(format!("{v}"))?;
        }
        // terminate the row
        writer.write_record(None::<&[u8]>)?;
    }
    writer.flush().map_err(Error::Io)?;
    Ok(())
}

fn write_jsonl<F: Real>(out: &mut dyn Write, records: &[FeatureVector<F>]) -> Result<()> {
    for rec in records {
        serde_json::to_writer(&mut *out, rec)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

fn parse_error(path: &Path, line: usize, msg: String) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg,
    }
}

/// Write a file atomically: content goes to a sibling `.tmp` file first, which
/// is renamed over `path` only after a successful flush.
pub fn atomic_write(
    path: &Path,
    write_fn: impl FnOnce(&mut BufWriter<File>) -> Result<()>,
) -> Result<()> {
    let file_name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::InvalidParam(format!("bad output path {}", path.display())))?;
    let tmp_path = path.with_file_name(format!(".{file_name}.tmp"));
    let mut writer = BufWriter::new(File::create(&tmp_path)?);
    let result = write_fn(&mut writer).and_then(|()| writer.flush().map_err(Error::Io));
    match result {
        Ok(()) => {
            std::fs::rename(&tmp_path, path)?;
            Ok(())
        }
        Err(e) => {
            let _ = std::fs::remove_file(&tmp_path);
            Err(e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn fv(sample: &str, subject: &str, values: &[f64]) -> FeatureVector<f64> {
        FeatureVector::new(sample, subject, values.to_vec())
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("train.csv");
        let gallery = Gallery::from_records(vec![
            fv("a1", "alice", &[1.0, 2.5]),
            fv("b1", "bob", &[-0.25, 3.0]),
        ])
        .unwrap();
        save_gallery(&path, FileFormat::Csv, &gallery).unwrap();
        let loaded: Gallery<f64> = load_gallery(&path, FileFormat::Csv).unwrap();
        assert_eq!(loaded, gallery);

        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "a1,alice,1,2.5\nb1,bob,-0.25,3\n");
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("probes.jsonl");
        let probes = ProbeSet::from_records(vec![
            fv("p1", "?", &[0.5]),
            fv("p2", "alice", &[1.5]),
        ])
        .unwrap();
        save_probes(&path, FileFormat::Jsonl, &probes).unwrap();
        let loaded: ProbeSet<f64> = load_probes(&path, FileFormat::Jsonl).unwrap();
        assert_eq!(loaded, probes);

        let text = std::fs::read_to_string(&path).unwrap();
        let first = text.lines().next().unwrap();
        assert_eq!(
            first,
            r#"{"sample_id":"p1","subject_id":"?","values":[0.5]}"#
        );
    }

    #[test]
    fn csv_parse_error_reports_line() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "a1,alice,1.0\nb1,bob,oops\n").unwrap();
        let err = load_gallery::<f64>(&path, FileFormat::Csv).unwrap_err();
        match err {
            Error::Parse { line, ref msg, .. } => {
                assert_eq!(line, 2);
                assert!(msg.contains("oops"), "{msg}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn csv_short_row_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("short.csv");
        std::fs::write(&path, "a1,alice\n").unwrap();
        let err = load_gallery::<f64>(&path, FileFormat::Csv).unwrap_err();
        assert!(err.to_string().contains("expected sample_id"), "{err}");
    }

    #[test]
    fn jsonl_skips_blank_lines() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("probes.jsonl");
        std::fs::write(
            &path,
            "{\"sample_id\":\"p1\",\"subject_id\":\"?\",\"values\":[1.0]}\n\n",
        )
        .unwrap();
        let loaded: ProbeSet<f64> = load_probes(&path, FileFormat::Jsonl).unwrap();
        assert_eq!(loaded.len(), 1);
    }

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("out.txt");
        atomic_write(&path, |w| {
            w.write_all(b"hello")?;
            Ok(())
        })
        .unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "hello");
        let entries: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(entries.len(), 1);
    }

    #[test]
    fn f32_gallery_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("train.csv");
        let gallery = Gallery::<f32>::from_records(vec![
            FeatureVector::new("a1", "alice", vec![0.1f32, 0.2]),
            FeatureVector::new("b1", "bob", vec![0.3f32, 0.4]),
        ])
        .unwrap();
        save_gallery(&path, FileFormat::Csv, &gallery).unwrap();
        let loaded: Gallery<f32> = load_gallery(&path, FileFormat::Csv).unwrap();
        assert_eq!(loaded, gallery);
    }
}
