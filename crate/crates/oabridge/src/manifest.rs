//! JSONL dataset manifests.
//!
//! A manifest is a UTF-8 file with one JSON object per line, each binding
//! together the file paths and metadata of one utterance. Relative paths
//! are resolved against the directory containing the manifest, so a dataset
//! directory can be moved or copied wholesale.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One dataset row. `noisy_path` is the only mandatory audio reference;
/// everything else is optional metadata that individual tools may require
/// (e.g. the oracle enhancer needs `clean_path`, WER scoring needs
/// `transcript`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clean_path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_path: Option<String>,
    pub noisy_path: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub enhanced_path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transcript: Option<String>,
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: invalid record: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: duplicate record id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: record {id:?} has an empty noisy_path")]
    EmptyNoisyPath { line: usize, id: String },
}

/// Resolves a manifest-relative path string against the manifest's
/// directory; absolute paths pass through unchanged.
pub fn resolve_path(manifest_dir: &Path, path: &str) -> PathBuf {
    let p = Path::new(path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        manifest_dir.join(p)
    }
}

/// Reads and validates a manifest: every line must parse, ids must be
/// unique, and `noisy_path` must be nonempty. Blank lines are ignored.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<UtteranceRecord>, ManifestError> {
    let path = path.as_ref();
    let file = fs::File::open(path)
        .map_err(|e| ManifestError::Io { path: path.display().to_string(), source: e })?;
    let mut records = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| ManifestError::Io { path: path.display().to_string(), source: e })?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 1;
        let record: UtteranceRecord =
            serde_json::from_str(&line).map_err(|e| ManifestError::Parse { line: lineno, source: e })?;
        if record.noisy_path.is_empty() {
            return Err(ManifestError::EmptyNoisyPath { line: lineno, id: record.id });
        }
        if !seen.insert(record.id.clone()) {
            return Err(ManifestError::DuplicateId { line: lineno, id: record.id });
        }
        records.push(record);
    }
    Ok(records)
}

/// Writes records as one JSON object per line. The serialization is
/// deterministic (fixed field order, shortest round-trip numbers), so equal
/// record lists produce byte-identical manifests.
pub fn write_manifest(records: &[UtteranceRecord], path: impl AsRef<Path>) -> Result<(), ManifestError> {
    let path = path.as_ref();
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serialization cannot fail"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| ManifestError::Io { path: path.display().to_string(), source: e })
}
