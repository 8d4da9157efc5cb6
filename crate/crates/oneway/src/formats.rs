//! JSON files for profiles, sequences and threshold functions.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use oneway_core::RateSequence;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::ingest::{ingest_csv, CsvOptions};

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Loads a sequence from `{m_bound, rates}` JSON, or from CSV for any other
/// extension.
pub fn read_sequence(path: &Path, csv: &CsvOptions, m_bound: f64) -> Result<RateSequence> {
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        read_json(path)
    } else {
        Ok(ingest_csv(path, csv, m_bound)?.sequence)
    }
}
