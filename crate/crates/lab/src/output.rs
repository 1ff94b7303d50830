//! CSV tables and summary files.
//!
//! Floats are written as `{:.16e}` (17 significant digits, exact
//! round-trip). Rows keep the order in which studies produce them, so the
//! same config always yields the same bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::LabError;

/// One CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    /// Integer column (indices, counts).
    Int(i64),
    /// Float column.
    Float(f64),
    /// Text column (verdicts, multi-indices).
    Text(String),
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// Float at 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Comma-separated floats in brackets.
pub fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| fmt_f64(*x)).collect();
    format!("[{}]", parts.join(", "))
}

impl Cell {
    fn render(&self, out: &mut String) {
        match self {
            Cell::Int(v) => write!(out, "{v}").expect("string write"),
            Cell::Float(v) => out.push_str(&fmt_f64(*v)),
            Cell::Text(s) if s.contains([',', '"', '\n']) => {
                write!(out, "\"{}\"", s.replace('"', "\"\"")).expect("string write")
            }
            Cell::Text(s) => out.push_str(s),
        }
    }
}

/// A header line plus rows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    /// Column names.
    pub header: Vec<String>,
    /// Rows, each as long as the header.
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    /// Empty table with the given columns.
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    /// Appends a row.
    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Renders the CSV text.
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, c) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                c.render(&mut out);
            }
            out.push('\n');
        }
        out
    }

    /// Float values of a named column, skipping non-float cells.
    pub fn column(&self, name: &str) -> Vec<f64> {
        let Some(j) = self.header.iter().position(|h| h == name) else { return Vec::new() };
        self.rows
            .iter()
            .filter_map(|r| match r[j] {
                Cell::Float(v) => Some(v),
                Cell::Int(v) => Some(v as f64),
                Cell::Text(_) => None,
            })
            .collect()
    }
}

/// Result of one study: the raw sequences and the summary text.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyOutput {
    /// Raw sequences.
    pub table: Table,
    /// Human-readable summary.
    pub summary: String,
}

/// Paths of the two output files.
pub fn output_paths(dir: &Path, name: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("{name}.csv")), dir.join(format!("{name}.summary.txt")))
}

/// Writes both files. On any failure neither file is left behind.
pub fn write_outputs(dir: &Path, name: &str, out: &StudyOutput) -> Result<(PathBuf, PathBuf), LabError> {
    let (csv, summary) = output_paths(dir, name);
    let result = fs::create_dir_all(dir)
        .and_then(|_| fs::write(&csv, out.table.to_csv()))
        .and_then(|_| fs::write(&summary, &out.summary));
    match result {
        Ok(()) => Ok((csv, summary)),
        Err(e) => {
            remove_outputs(dir, name);
            Err(LabError::Io(e))
        }
    }
}

/// Deletes the output files of `name`, ignoring ones that do not exist.
pub fn remove_outputs(dir: &Path, name: &str) {
    let (csv, summary) = output_paths(dir, name);
    let _ = fs::remove_file(csv);
    let _ = fs::remove_file(summary);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_through_the_csv() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn csv_has_header_and_quoted_text() {
        let mut t = Table::new(["a", "b", "c"]);
        t.push(vec![1usize.into(), 0.5.into(), "(1,0)".into()]);
        assert_eq!(t.to_csv(), "a,b,c\n1,5.0000000000000000e-1,\"(1,0)\"\n");
        assert_eq!(t.column("b"), vec![0.5]);
    }
}
