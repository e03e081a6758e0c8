//! Plain-text file formats.
//!
//! * Grid file: one decimal time per line; blank lines and lines starting
//!   with `#` are ignored.
//! * Matrix CSV: row-major, comma separated, every value printed with 17
//!   significant digits so it reads back bit-exactly. Optional `#` metadata
//!   lines may precede the data.
//! * Band / tridiagonal CSV: two data lines, the diagonal then the first
//!   off-diagonal (empty for `n = 1`).
//! * I/O data CSV: header line `u,y`, then one sample per line.

use std::fmt::Write as _;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::grid::SamplingGrid;

/// Formats `x` with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(field: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|e| Error::Parse(format!("line {line}: `{}`: {e}", field.trim())))
}

/// Data lines with their 1-based line numbers, skipping comments and blanks.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub fn parse_grid(text: &str) -> Result<SamplingGrid> {
    let times = data_lines(text)
        .map(|(no, l)| parse_f64(l, no))
        .collect::<Result<Vec<_>>>()?;
    SamplingGrid::new(times)
}

pub fn write_grid(grid: &SamplingGrid) -> String {
    grid.times().iter().map(|t| fmt_f64(*t) + "\n").collect()
}

/// `#`-prefixed metadata lines.
pub fn metadata_header(pairs: &[(&str, String)]) -> String {
    let mut out = String::new();
    for (k, v) in pairs {
        let _ = writeln!(out, "# {k}: {v}");
    }
    out
}

fn write_row(out: &mut String, row: &[f64]) {
    let line: Vec<String> = row.iter().map(|x| fmt_f64(*x)).collect();
    out.push_str(&line.join(","));
    out.push('\n');
}

pub fn write_matrix_csv(m: &DenseMatrix) -> String {
    let mut out = String::new();
    for r in m.row_iter() {
        write_row(&mut out, r);
    }
    out
}

fn parse_row(line: &str, no: usize) -> Result<Vec<f64>> {
    if line.is_empty() {
        return Ok(Vec::new());
    }
    line.split(',').map(|f| parse_f64(f, no)).collect()
}

pub fn parse_matrix_csv(text: &str) -> Result<DenseMatrix> {
    let rows = data_lines(text)
        .map(|(no, l)| parse_row(l, no))
        .collect::<Result<Vec<_>>>()?;
    if rows.is_empty() {
        return Err(Error::Parse("matrix file has no data rows".into()));
    }
    DenseMatrix::from_rows(&rows)
}

/// Two lines: diagonal, then off-diagonal.
pub fn write_band_csv(diag: &[f64], offdiag: &[f64]) -> String {
    let mut out = String::new();
    write_row(&mut out, diag);
    write_row(&mut out, offdiag);
    out
}

/// Reads the two-line band format. A missing second line means `n = 1`.
pub fn parse_band_csv(text: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    // Blank lines matter here: an empty off-diagonal is written as one.
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.starts_with('#'))
        .skip_while(|(_, l)| l.is_empty());
    let (no, first) = lines
        .next()
        .ok_or_else(|| Error::Parse("band file has no diagonal line".into()))?;
    let diag = parse_row(first, no)?;
    let offdiag = match lines.next() {
        Some((no, l)) => parse_row(l, no)?,
        None => Vec::new(),
    };
    if let Some((no, l)) = lines.find(|(_, l)| !l.is_empty()) {
        return Err(Error::Parse(format!("line {no}: unexpected data `{l}`")));
    }
    Ok((diag, offdiag))
}

/// Reads a `u,y` CSV with a header line.
pub fn parse_io_csv(text: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut lines = data_lines(text);
    let (no, header) = lines
        .next()
        .ok_or_else(|| Error::Parse("data file is empty".into()))?;
    let cols: Vec<String> = header.split(',').map(|s| s.trim().to_ascii_lowercase()).collect();
    if cols != ["u", "y"] {
        return Err(Error::Parse(format!(
            "line {no}: expected header `u,y`, found `{header}`"
        )));
    }
    let (mut u, mut y) = (Vec::new(), Vec::new());
    for (no, l) in lines {
        let row = parse_row(l, no)?;
        if row.len() != 2 {
            return Err(Error::Parse(format!("line {no}: expected two columns")));
        }
        u.push(row[0]);
        y.push(row[1]);
    }
    Ok((u, y))
}

pub fn write_io_csv(u: &[f64], y: &[f64]) -> String {
    let mut out = String::from("u,y\n");
    for (a, b) in u.iter().zip(y) {
        let _ = writeln!(out, "{},{}", fmt_f64(*a), fmt_f64(*b));
    }
    out
}
