//! Atomic file output, number formatting and the curve-set CSV format.
//!
//! A curve file holds the grid on its first row and one curve per following
//! row. Lines starting with `#` are comments.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use funcreg_core::{CurveSet, Grid};

use crate::error::{Error, Result};

/// Writes `contents` to a temporary file beside `path`, then renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(contents).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Shortest decimal string that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// `# generated at unix time <secs>` unless output must be reproducible.
pub fn provenance_line(deterministic: bool) -> String {
    if deterministic {
        return String::new();
    }
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("# generated at unix time {secs}\n")
}

pub fn push_row(out: &mut String, values: impl IntoIterator<Item = f64>) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(',');
        }
        first = false;
        out.push_str(&fmt_f64(v));
    }
    out.push('\n');
}

/// Contents of a curve file. `grid` is `None` for an empty file.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveTable {
    pub grid: Option<Grid>,
    pub rows: Vec<Vec<f64>>,
}

impl CurveTable {
    pub fn from_set(set: &CurveSet) -> Self {
        CurveTable {
            grid: Some(set.grid().clone()),
            rows: set.rows().map(<[f64]>::to_vec).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// The curves as a set; fails when the file holds no curves.
    pub fn to_set(&self, path: &Path) -> Result<CurveSet> {
        let grid = self
            .grid
            .clone()
            .ok_or_else(|| Error::file(path, "file is empty"))?;
        if self.rows.is_empty() {
            return Err(Error::file(path, "file contains a grid but no curves"));
        }
        let data = self.rows.concat();
        CurveSet::from_rows(grid, data).map_err(|e| Error::file(path, e.to_string()))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if let Some(g) = &self.grid {
            push_row(&mut out, g.points().iter().copied());
        }
        for r in &self.rows {
            push_row(&mut out, r.iter().copied());
        }
        out
    }
}

fn parse_cell(path: &Path, row: usize, column: usize, raw: &str) -> Result<f64> {
    let cell = raw.trim();
    let v: f64 = cell.parse().map_err(|_| Error::Cell {
        path: path.to_path_buf(),
        row,
        column,
        message: format!("`{cell}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Cell {
            path: path.to_path_buf(),
            row,
            column,
            message: format!("`{cell}` is not finite"),
        });
    }
    Ok(v)
}

/// Parses curve CSV text. Row and column numbers in errors are 1-based lines of `path`.
pub fn parse_curves(path: &Path, text: &str) -> Result<CurveTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut grid: Option<Grid> = None;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::file(path, e.to_string()))?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let values = record
            .iter()
            .enumerate()
            .map(|(c, cell)| parse_cell(path, line, c + 1, cell))
            .collect::<Result<Vec<f64>>>()?;
        match &grid {
            None => {
                let g = Grid::new(values).map_err(|e| Error::Row {
                    path: path.to_path_buf(),
                    row: line,
                    message: format!("invalid grid: {e}"),
                })?;
                grid = Some(g);
            }
            Some(g) => {
                if values.len() != g.len() {
                    return Err(Error::Row {
                        path: path.to_path_buf(),
                        row: line,
                        message: format!("expected {} values, found {}", g.len(), values.len()),
                    });
                }
                rows.push(values);
            }
        }
    }
    Ok(CurveTable { grid, rows })
}

pub fn read_curves(path: &Path) -> Result<CurveTable> {
    parse_curves(path, &read_to_string(path)?)
}

/// Reads a file that must contain at least one curve.
pub fn read_curve_set(path: &Path) -> Result<CurveSet> {
    read_curves(path)?.to_set(path)
}

pub fn write_curve_set(path: &Path, set: &CurveSet) -> Result<()> {
    write_atomic(path, CurveTable::from_set(set).to_csv().as_bytes())
}

/// `key,value` lines for small reports.
pub fn key_values(pairs: &[(&str, String)]) -> String {
    let mut out = String::from("key,value\n");
    for (k, v) in pairs {
        let _ = writeln!(out, "{k},{v}");
    }
    out
}
