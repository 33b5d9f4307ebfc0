//! CSV ingestion for time series: a `t,y` header followed by one
//! observation per row, timestamps strictly increasing. Gaps are fine —
//! the model is built for irregular sampling — but out-of-order or
//! malformed rows are rejected with the offending row number.

use std::path::Path;

use pmgp::{Error, Result};

/// One observation: a timestamp and a value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesRecord {
    pub t: f64,
    pub y: f64,
}

/// Read a series from a CSV file with header `t,y`.
///
/// Row numbers in error messages are 1-based file lines (the header is
/// line 1, the first data row line 2).
pub fn ingest_csv(path: &Path) -> Result<Vec<SeriesRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;

    {
        let headers = reader
            .headers()
            .map_err(|e| Error::Parse(format!("cannot read header of {}: {e}", path.display())))?;
        let got: Vec<&str> = headers.iter().collect();
        if got != ["t", "y"] {
            return Err(Error::Parse(format!(
                "expected header `t,y`, found `{}` in {}",
                got.join(","),
                path.display()
            )));
        }
    }

    let mut records: Vec<SeriesRecord> = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::Parse(format!("row {line}: {e}")))?;
        if row.len() != 2 {
            return Err(Error::Parse(format!(
                "row {line}: expected 2 fields, found {}",
                row.len()
            )));
        }
        let t: f64 = row[0]
            .parse()
            .map_err(|_| Error::Parse(format!("row {line}: cannot parse t from `{}`", &row[0])))?;
        let y: f64 = row[1]
            .parse()
            .map_err(|_| Error::Parse(format!("row {line}: cannot parse y from `{}`", &row[1])))?;
        if !t.is_finite() || !y.is_finite() {
            return Err(Error::Parse(format!("row {line}: non-finite value")));
        }
        if let Some(prev) = records.last() {
            if t <= prev.t {
                return Err(Error::Ordering(format!(
                    "row {line}: time {t} does not advance past {}",
                    prev.t
                )));
            }
        }
        records.push(SeriesRecord { t, y });
    }
    Ok(records)
}

/// Estimate the sampling frequency as the reciprocal of the mean gap
/// over the first `min(10, n-1)` gaps. Needs at least two records.
pub fn estimate_fs(records: &[SeriesRecord]) -> Result<f64> {
    if records.len() < 2 {
        return Err(Error::Input(format!(
            "need at least 2 records to estimate a sampling frequency, got {}",
            records.len()
        )));
    }
    let n_gaps = (records.len() - 1).min(10);
    let total: f64 = (0..n_gaps).map(|i| records[i + 1].t - records[i].t).sum();
    Ok(n_gaps as f64 / total)
}
