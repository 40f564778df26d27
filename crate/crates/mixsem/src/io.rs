//! CSV datasets.
//!
//! The first row is a header. An outcome cell is missing when it is empty,
//! `NA`, or equal to the configured token. Covariate cells must be present.
//! Values are written with the shortest decimal form that parses back to the
//! same `f64`, so a write/read round trip is exact.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use mixsem_core::Dataset;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};

/// Which columns hold outcomes and covariates.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Columns {
    /// Outcome columns; when empty, every column that is not a covariate.
    #[serde(default)]
    pub outcomes: Vec<String>,
    #[serde(default)]
    pub covariates: Vec<String>,
    /// Extra spelling of a missing outcome cell besides `""` and `NA`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub missing_token: Option<String>,
    /// Rescale every outcome to this observed standard deviation after loading.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standardize_sd: Option<f64>,
}

fn csv_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Csv { path: path.to_path_buf(), message: message.into() }
}

fn is_missing(cell: &str, token: Option<&str>) -> bool {
    let c = cell.trim();
    c.is_empty() || c == "NA" || token.is_some_and(|t| c == t)
}

fn parse_cell(path: &Path, row: usize, column: &str, cell: &str) -> Result<f64> {
    let v: f64 = cell
        .trim()
        .parse()
        .map_err(|_| csv_err(path, format!("row {row}, column '{column}': cannot parse '{cell}' as a number")))?;
    if !v.is_finite() {
        return Err(csv_err(path, format!("row {row}, column '{column}': non-finite value '{cell}'")));
    }
    Ok(v)
}

/// Reads `path` and selects the given columns. Rows are numbered from 1,
/// not counting the header.
pub fn load_csv(path: &Path, columns: &Columns) -> Result<Dataset> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_err(path, format!("header: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let find = |name: &String| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| csv_err(path, format!("column '{name}' not found in header")))
    };
    let covariate_idx = columns.covariates.iter().map(find).collect::<Result<Vec<_>>>()?;
    let outcome_names: Vec<String> = if columns.outcomes.is_empty() {
        header.iter().filter(|h| !columns.covariates.contains(h)).cloned().collect()
    } else {
        columns.outcomes.clone()
    };
    let outcome_idx = outcome_names.iter().map(find).collect::<Result<Vec<_>>>()?;
    let token = columns.missing_token.as_deref();

    let mut y = Vec::new();
    let mut x = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| csv_err(path, format!("row {row}: {e}")))?;
        let mut yr = Vec::with_capacity(outcome_idx.len());
        for (&c, name) in outcome_idx.iter().zip(&outcome_names) {
            let cell = record.get(c).unwrap_or("");
            yr.push(if is_missing(cell, token) { None } else { Some(parse_cell(path, row, name, cell)?) });
        }
        if yr.iter().all(Option::is_none) {
            return Err(csv_err(path, format!("row {row} has no observed outcome")));
        }
        let mut xr = Vec::with_capacity(covariate_idx.len());
        for (&c, name) in covariate_idx.iter().zip(&columns.covariates) {
            let cell = record.get(c).unwrap_or("");
            if is_missing(cell, token) {
                return Err(csv_err(path, format!("row {row}, column '{name}': missing covariate")));
            }
            xr.push(parse_cell(path, row, name, cell)?);
        }
        y.push(yr);
        x.push(xr);
    }
    let ds = Dataset::from_rows(&y, &x, outcome_names, columns.covariates.clone())
        .map_err(|e| csv_err(path, e.to_string()))?;
    match columns.standardize_sd {
        Some(sd) => Ok(ds.standardize_outcomes(sd)?),
        None => Ok(ds),
    }
}

/// Writes outcomes then covariates; missing cells are empty.
pub fn write_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(file);
    let to_err = |e: csv::Error| csv_err(path, e.to_string());
    w.write_record(ds.outcome_names().iter().chain(ds.covariate_names())).map_err(to_err)?;
    let mut record = Vec::with_capacity(ds.m() + ds.p());
    for i in 0..ds.n() {
        record.clear();
        record.extend((0..ds.m()).map(|j| ds.y(i, j).map(|v| v.to_string()).unwrap_or_default()));
        record.extend(ds.x_row(i).iter().map(f64::to_string));
        w.write_record(&record).map_err(to_err)?;
    }
    w.flush().map_err(io_err(path))
}

/// Serializes `value` as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Invalid(e.to_string()))?;
    text.push('\n');
    let mut f = File::create(path).map_err(io_err(path))?;
    f.write_all(text.as_bytes()).map_err(io_err(path))
}

/// Parses a JSON file, reporting the path and serde's key/line context.
pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| Error::Config { path: path.to_path_buf(), message: e.to_string() })
}

/// Writes rows of already formatted fields.
pub fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let to_err = |e: csv::Error| csv_err(path, e.to_string());
    w.write_record(header).map_err(to_err)?;
    for row in rows {
        w.write_record(&row).map_err(to_err)?;
    }
    w.flush().map_err(io_err(path))
}
