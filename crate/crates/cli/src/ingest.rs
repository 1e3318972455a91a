//! Two-column extraction from a headed CSV file.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};

pub const MIN_ROWS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct Columns {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub rows_read: usize,
    /// Records skipped because a value was missing or not finite.
    pub rows_dropped: usize,
}

/// Missing-value spellings that drop the record instead of failing.
fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "NA" | "na" | "NaN" | "nan" | "NULL" | "null")
}

enum Cell {
    Value(f64),
    Missing,
}

fn parse_cell(cell: &str, row: usize, column: &str) -> Result<Cell> {
    let cell = cell.trim();
    if is_missing(cell) {
        return Ok(Cell::Missing);
    }
    let v: f64 = cell
        .parse()
        .map_err(|_| anyhow!("row {row}, column '{column}': '{cell}' is not a number"))?;
    Ok(if v.is_finite() { Cell::Value(v) } else { Cell::Missing })
}

pub fn read_columns(path: &Path, x_col: &str, y_col: &str) -> Result<Columns> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let headers = reader.headers().context("reading the header row")?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| anyhow!("column '{name}' not found in {} (columns: {})", path.display(), headers.iter().collect::<Vec<_>>().join(", ")))
    };
    let (xi, yi) = (find(x_col)?, find(y_col)?);
    let mut out = Columns {
        xs: Vec::new(),
        ys: Vec::new(),
        rows_read: 0,
        rows_dropped: 0,
    };
    for (i, record) in reader.records().enumerate() {
        // data rows are numbered from 1, after the header
        let row = i + 1;
        let record = record.with_context(|| format!("reading row {row}"))?;
        let x = parse_cell(record.get(xi).unwrap_or(""), row, x_col)?;
        let y = parse_cell(record.get(yi).unwrap_or(""), row, y_col)?;
        out.rows_read += 1;
        match (x, y) {
            (Cell::Value(x), Cell::Value(y)) => {
                out.xs.push(x);
                out.ys.push(y);
            }
            _ => out.rows_dropped += 1,
        }
    }
    if out.xs.len() < MIN_ROWS {
        bail!(
            "insufficient data: {} usable rows in {} (at least {MIN_ROWS} required)",
            out.xs.len(),
            path.display()
        );
    }
    Ok(out)
}
