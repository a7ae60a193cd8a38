//! Daily station files: header `station,d1,...,d365`, one station per row.

use std::collections::HashMap;
use std::path::Path;

use funcreg_core::weather::{StationSeries, WeatherDataset, DAYS};

use crate::error::{Error, Result};
use crate::io::{fmt_f64, read_to_string};

#[derive(Debug, Clone, PartialEq)]
struct StationRow {
    id: String,
    line: usize,
    values: Vec<f64>,
}

fn expected_header() -> Vec<String> {
    std::iter::once("station".to_string())
        .chain((1..=DAYS).map(|d| format!("d{d}")))
        .collect()
}

fn parse_station_file(path: &Path, text: &str, nonnegative: bool) -> Result<Vec<StationRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| Error::file(path, e.to_string()))?,
        None => return Err(Error::file(path, "file is empty")),
    };
    let header_line = header.position().map(|p| p.line() as usize).unwrap_or(1);
    let expected = expected_header();
    if header.len() != expected.len() {
        return Err(Error::Row {
            path: path.to_path_buf(),
            row: header_line,
            message: format!(
                "header has {} columns, expected {}",
                header.len(),
                expected.len()
            ),
        });
    }
    for (c, (got, want)) in header.iter().zip(&expected).enumerate() {
        if !got.eq_ignore_ascii_case(want) {
            return Err(Error::Cell {
                path: path.to_path_buf(),
                row: header_line,
                column: c + 1,
                message: format!("header `{got}` should be `{want}`"),
            });
        }
    }
    let mut out: Vec<StationRow> = Vec::new();
    for record in records {
        let record = record.map_err(|e| Error::file(path, e.to_string()))?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != DAYS + 1 {
            return Err(Error::Row {
                path: path.to_path_buf(),
                row: line,
                message: format!("found {} columns, expected {}", record.len(), DAYS + 1),
            });
        }
        let id = record[0].to_string();
        let cell_err = |column: usize, message: String| Error::Cell {
            path: path.to_path_buf(),
            row: line,
            column,
            message,
        };
        if id.is_empty() {
            return Err(cell_err(1, "station id is empty".into()));
        }
        if let Some(prev) = out.iter().find(|r| r.id == id) {
            return Err(cell_err(
                1,
                format!("station `{id}` already appears on row {}", prev.line),
            ));
        }
        let mut values = Vec::with_capacity(DAYS);
        for (c, cell) in record.iter().enumerate().skip(1) {
            let v: f64 = cell
                .parse()
                .map_err(|_| cell_err(c + 1, format!("`{cell}` is not a number")))?;
            if !v.is_finite() {
                return Err(cell_err(c + 1, format!("`{cell}` is not finite")));
            }
            if nonnegative && v < 0.0 {
                return Err(cell_err(c + 1, format!("negative precipitation {cell}")));
            }
            values.push(v);
        }
        out.push(StationRow { id, line, values });
    }
    Ok(out)
}

/// Loads matching temperature and precipitation files. Stations keep the
/// order of the temperature file.
pub fn load_weather(temp_path: &Path, precip_path: &Path) -> Result<WeatherDataset> {
    let temp = parse_station_file(temp_path, &read_to_string(temp_path)?, false)?;
    let precip = parse_station_file(precip_path, &read_to_string(precip_path)?, true)?;
    parse_pair(temp_path, temp, precip_path, precip)
}

/// Same as [`load_weather`] on in-memory text.
pub fn parse_weather(
    temp_path: &Path,
    temp_text: &str,
    precip_path: &Path,
    precip_text: &str,
) -> Result<WeatherDataset> {
    let temp = parse_station_file(temp_path, temp_text, false)?;
    let precip = parse_station_file(precip_path, precip_text, true)?;
    parse_pair(temp_path, temp, precip_path, precip)
}

fn parse_pair(
    temp_path: &Path,
    temp: Vec<StationRow>,
    precip_path: &Path,
    precip: Vec<StationRow>,
) -> Result<WeatherDataset> {
    let mut by_id: HashMap<String, StationRow> =
        precip.into_iter().map(|r| (r.id.clone(), r)).collect();
    let mut stations = Vec::with_capacity(temp.len());
    for t in temp {
        let p = by_id.remove(&t.id).ok_or_else(|| Error::Row {
            path: precip_path.to_path_buf(),
            row: t.line,
            message: format!("station `{}` from {} is missing", t.id, temp_path.display()),
        })?;
        let series = StationSeries::new(t.id.clone(), t.values, p.values)
            .map_err(|e| Error::file(temp_path, format!("station `{}`: {e}", t.id)))?;
        stations.push(series);
    }
    if let Some(extra) = by_id.values().min_by_key(|r| r.line) {
        return Err(Error::Row {
            path: precip_path.to_path_buf(),
            row: extra.line,
            message: format!(
                "station `{}` is missing from {}",
                extra.id,
                temp_path.display()
            ),
        });
    }
    WeatherDataset::new(stations).map_err(|e| Error::file(temp_path, e.to_string()))
}

/// Renders the two station files for `dataset`.
pub fn weather_csv(dataset: &WeatherDataset) -> (String, String) {
    let header = expected_header().join(",") + "\n";
    let mut temp = header.clone();
    let mut precip = header;
    for s in dataset.stations() {
        for (out, values) in [(&mut temp, &s.daily_temp), (&mut precip, &s.daily_precip)] {
            out.push_str(&s.station_id);
            for v in values {
                out.push(',');
                out.push_str(&fmt_f64(*v));
            }
            out.push('\n');
        }
    }
    (temp, precip)
}
