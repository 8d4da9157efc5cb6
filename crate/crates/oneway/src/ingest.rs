//! Reading real exchange-rate series from CSV.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use oneway_core::RateSequence;
use serde::{Deserialize, Serialize};

use crate::error::IngestError;

/// Which CSV field holds the rate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Column {
    Index(usize),
    Name(String),
}

impl std::str::FromStr for Column {
    type Err = std::convert::Infallible;

    /// Digits select a zero-based index, anything else a header name.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.parse() {
            Ok(i) => Column::Index(i),
            Err(_) => Column::Name(s.to_owned()),
        })
    }
}

/// How raw prices are mapped into `[1, M]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Divide by the series minimum. Keeps every price ratio intact.
    #[default]
    MinRatio,
    /// Map `[min, max]` linearly onto `[1, M]`.
    Affine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvOptions {
    pub column: Column,
    pub has_header: bool,
    pub normalization: Normalization,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            column: Column::Index(0),
            has_header: false,
            normalization: Normalization::MinRatio,
        }
    }
}

/// A normalized sequence together with the values it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestedSeries {
    pub sequence: RateSequence,
    pub original: Vec<f64>,
    /// Source line of each value, for error reporting downstream.
    pub lines: Vec<u64>,
}

pub fn ingest_csv(
    path: &Path,
    options: &CsvOptions,
    m_bound: f64,
) -> Result<IngestedSeries, IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.to_owned(),
        source,
    })?;
    ingest_reader(file, options, m_bound)
}

pub fn ingest_reader<R: Read>(
    reader: R,
    options: &CsvOptions,
    m_bound: f64,
) -> Result<IngestedSeries, IngestError> {
    let (original, lines) = read_column(reader, options)?;
    let rates = normalize(&original, &lines, options.normalization, m_bound)?;
    Ok(IngestedSeries {
        sequence: RateSequence::new(rates, m_bound)?,
        original,
        lines,
    })
}

/// Parses one numeric column, returning values and their line numbers.
pub fn read_column<R: Read>(
    reader: R,
    options: &CsvOptions,
) -> Result<(Vec<f64>, Vec<u64>), IngestError> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(options.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let index = match &options.column {
        Column::Index(i) => *i,
        Column::Name(name) => {
            let headers = csv.headers().map_err(|e| csv_error(&e))?;
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| IngestError::ColumnNotFound(name.clone()))?
        }
    };
    let mut values = Vec::new();
    let mut lines = Vec::new();
    for record in csv.records() {
        let record = record.map_err(|e| csv_error(&e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        let field = record.get(index).ok_or(IngestError::MissingField {
            line,
            width: record.len(),
        })?;
        let value: f64 = field.parse().map_err(|_| IngestError::NonNumeric {
            line,
            value: field.to_owned(),
        })?;
        if !value.is_finite() {
            return Err(IngestError::NonNumeric {
                line,
                value: field.to_owned(),
            });
        }
        values.push(value);
        lines.push(line);
    }
    if values.is_empty() {
        return Err(IngestError::Empty);
    }
    Ok((values, lines))
}

fn csv_error(e: &csv::Error) -> IngestError {
    IngestError::Csv {
        line: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    }
}

/// Maps raw prices into `[1, M]`. `lines` labels each value in errors.
pub fn normalize(
    values: &[f64],
    lines: &[u64],
    how: Normalization,
    m_bound: f64,
) -> Result<Vec<f64>, IngestError> {
    let line = |i: usize| lines.get(i).copied().unwrap_or(i as u64 + 1);
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if values.is_empty() {
        return Err(IngestError::Empty);
    }
    match how {
        Normalization::MinRatio => {
            if lo <= 0.0 {
                let i = values.iter().position(|&v| v <= 0.0).unwrap_or(0);
                return Err(IngestError::NonPositive {
                    line: line(i),
                    value: values[i],
                });
            }
            values
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    let scaled = (v / lo).max(1.0);
                    if scaled > m_bound {
                        Err(IngestError::OutOfRange {
                            line: line(i),
                            value: v,
                            scaled,
                            m_bound,
                        })
                    } else {
                        Ok(scaled)
                    }
                })
                .collect()
        }
        Normalization::Affine => {
            let span = hi - lo;
            Ok(values
                .iter()
                .map(|&v| {
                    if span > 0.0 {
                        (1.0 + (v - lo) / span * (m_bound - 1.0)).clamp(1.0, m_bound)
                    } else {
                        1.0
                    }
                })
                .collect())
        }
    }
}
