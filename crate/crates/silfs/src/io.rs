//! CSV ingestion and emission.
//!
//! The on-disk format is a plain comma-separated table with a header row
//! whose first column is named `y`; the remaining columns form the design
//! matrix. Lines starting with `#` are comments and are skipped. Floats are
//! written in shortest round-trip form, so a write/read cycle reproduces
//! the numbers bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Reads a dataset from `path`.
pub fn ingest_csv(path: &Path) -> Result<Dataset> {
    let raw = std::fs::read_to_string(path)?;
    parse_csv(&raw)
}

pub(crate) fn parse_csv(raw: &str) -> Result<Dataset> {
    let mut lines = raw
        .lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Data("empty file: expected a header row".into()))?;
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    if names.first().map(|n| *n) != Some("y") {
        return Err(Error::Data(format!(
            "first column must be named \"y\", found \"{}\"",
            names.first().copied().unwrap_or_default()
        )));
    }
    let p = names.len() - 1;
    if p == 0 {
        return Err(Error::Data("no feature columns after \"y\"".into()));
    }

    let mut response = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (row_idx, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != names.len() {
            return Err(Error::Data(format!(
                "row {} has {} cells, expected {}",
                row_idx + 1,
                cells.len(),
                names.len()
            )));
        }
        let mut row = Vec::with_capacity(p);
        for (col_idx, cell) in cells.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| {
                Error::Data(format!(
                    "parse error at row {}, col \"{}\": \"{}\"",
                    row_idx + 1,
                    names[col_idx],
                    cell
                ))
            })?;
            if !value.is_finite() {
                return Err(Error::Data(format!(
                    "non-finite value at row {}, col \"{}\"",
                    row_idx + 1,
                    names[col_idx]
                )));
            }
            if col_idx == 0 {
                response.push(value);
            } else {
                row.push(value);
            }
        }
        rows.push(row);
    }

    let n = rows.len();
    let design = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
    Dataset::new(DVector::from_vec(response), design)
}

/// Writes a dataset as CSV, preceded by `#`-prefixed provenance lines.
pub fn write_dataset_csv(path: &Path, dataset: &Dataset, comments: &[String]) -> Result<()> {
    let mut out = String::new();
    for c in comments {
        writeln!(out, "# {c}").expect("string write");
    }
    out.push('y');
    for j in 1..=dataset.num_features() {
        write!(out, ",x{j}").expect("string write");
    }
    out.push('\n');
    for i in 0..dataset.num_samples() {
        write!(out, "{}", dataset.response[i]).expect("string write");
        for j in 0..dataset.num_features() {
            write!(out, ",{}", dataset.design[(i, j)]).expect("string write");
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}
