//! Artifact persistence: flat record CSV, pretty JSON and configuration hashes.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::DiagnosticsRecord;
use crate::error::Result;

/// One row of `records.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub run_id: String,
    pub time: f64,
    pub norm_name: String,
    pub value: f64,
}

/// Flattens records in their given order, norm names sorted within a record.
pub fn flatten(records: &[DiagnosticsRecord]) -> Vec<RecordRow> {
    records
        .iter()
        .flat_map(|r| {
            r.values.iter().map(move |(name, v)| RecordRow {
                run_id: r.run_id.clone(),
                time: r.time,
                norm_name: name.clone(),
                value: *v,
            })
        })
        .collect()
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let tmp = path.with_extension("csv.tmp");
    {
        let mut w = csv::Writer::from_path(&tmp)?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    fs::rename(tmp, path)?;
    Ok(())
}

pub fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

pub fn write_records(path: &Path, records: &[DiagnosticsRecord]) -> Result<()> {
    write_rows(path, &flatten(records))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, text)?;
    fs::rename(tmp, path)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

/// First 16 hex digits of the SHA-256 of the JSON encoding.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    let digest = Sha256::digest(serde_json::to_vec(value)?);
    Ok(digest[..8].iter().map(|b| format!("{b:02x}")).collect())
}
