//! Subcommand implementations and small shared plumbing.

pub mod cluster;
pub mod evaluate;
pub mod gen;
pub mod identify;
pub mod split;
pub mod sweep;

use std::path::{Path, PathBuf};

use anyhow::Context;
use osid::dataset::FileFormat;

use crate::Global;

/// Pick the table format for `path`: a recognized extension wins, otherwise
/// the global `--format` applies.
pub(crate) fn table_format(path: &Path, global: &Global) -> FileFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => FileFormat::Csv,
        Some("jsonl") => FileFormat::Jsonl,
        _ => global.format,
    }
}

/// Resolve an artifact path inside `--out-dir`, creating the directory.
pub(crate) fn out_path(global: &Global, name: &str) -> anyhow::Result<PathBuf> {
    std::fs::create_dir_all(&global.out_dir).with_context(|| {
        format!("cannot create output directory {}", global.out_dir.display())
    })?;
    Ok(global.out_dir.join(name))
}

/// Resolve an explicit output path (creating its parent) or fall back to a
/// default name inside `--out-dir`.
pub(crate) fn explicit_or_out(
    global: &Global,
    explicit: Option<&PathBuf>,
    default_name: &str,
) -> anyhow::Result<PathBuf> {
    match explicit {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).with_context(|| {
                    format!("cannot create output directory {}", parent.display())
                })?;
            }
            Ok(path.clone())
        }
        None => out_path(global, default_name),
    }
}
