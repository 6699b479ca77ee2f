//! Result tables and their CSV encoding.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

/// One CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => format_sig9(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<u64> for Cell {
    fn from(n: u64) -> Self {
        Cell::Int(n)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::Int(n as u64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_owned())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Text(b.to_string())
    }
}

/// A named record: experiment coordinates first, then outputs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultRow {
    cells: Vec<(&'static str, Cell)>,
}

impl ResultRow {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &'static str, value: impl Into<Cell>) -> Self {
        self.cells.push((name, value.into()));
        self
    }

    /// Appends the standard output columns; `ratio` is `estimate / theory` when both exist.
    pub fn outputs(self, estimate: Option<f64>, std_err: Option<f64>, theory: Option<f64>) -> Self {
        let ratio = match (estimate, theory) {
            (Some(e), Some(t)) if t != 0.0 => Some(e / t),
            _ => None,
        };
        self.with("estimate", estimate)
            .with("std_err", std_err)
            .with("theory", theory)
            .with("ratio", ratio)
    }

    pub fn columns(&self) -> Vec<&'static str> {
        self.cells.iter().map(|(n, _)| *n).collect()
    }

    pub fn get(&self, name: &str) -> Option<&Cell> {
        self.cells.iter().find(|(n, _)| *n == name).map(|(_, c)| c)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TableError {
    #[error("row {row} has columns {found:?}, expected {expected:?}")]
    Schema {
        row: usize,
        expected: Vec<&'static str>,
        found: Vec<&'static str>,
    },
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: io::Error },
}

/// Formats like C's `%.9g`.
pub fn format_sig9(x: f64) -> String {
    const P: i32 = 9;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..P).contains(&exp) {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        strip_zeros(&format!("{:.*}", (P - 1 - exp) as usize, x)).to_owned()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Checks that every row carries exactly `columns`, in order.
pub fn check_schema(columns: &[&'static str], rows: &[ResultRow]) -> Result<(), TableError> {
    for (i, r) in rows.iter().enumerate() {
        let found = r.columns();
        if found != columns {
            return Err(TableError::Schema {
                row: i,
                expected: columns.to_vec(),
                found,
            });
        }
    }
    Ok(())
}

/// CSV bytes: a header line and one line per row.
pub fn encode_csv(columns: &[&'static str], rows: &[ResultRow]) -> Result<Vec<u8>, TableError> {
    check_schema(columns, rows)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let io_err = |e: csv::Error| TableError::Io {
        path: "<memory>".into(),
        source: io::Error::other(e),
    };
    w.write_record(columns).map_err(io_err)?;
    for r in rows {
        w.write_record(r.cells.iter().map(|(_, c)| c.render())).map_err(io_err)?;
    }
    w.into_inner().map_err(|e| TableError::Io {
        path: "<memory>".into(),
        source: io::Error::other(e.to_string()),
    })
}

/// Writes the CSV for `rows` to `path`.
pub fn emit_csv(columns: &[&'static str], rows: &[ResultRow], path: &Path) -> Result<(), TableError> {
    let bytes = encode_csv(columns, rows)?;
    let io = |source| TableError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut f = File::create(path).map_err(io)?;
    f.write_all(&bytes).map_err(io)?;
    Ok(())
}
