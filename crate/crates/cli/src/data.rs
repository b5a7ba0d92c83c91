//! CSV ingestion and output.
//!
//! A first row containing any non-numeric field is taken as a header.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use spinn::{Dataset, Task};

use crate::error::{CliError, Result};

/// Parsed numeric table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Option<Vec<String>>,
    pub values: Array2<f64>,
}

fn is_numeric(field: &str) -> bool {
    field.trim().parse::<f64>().is_ok()
}

pub fn read_table(path: &Path) -> Result<Table> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut header = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = i + 1;
        if i == 0 && record.iter().any(|f| !is_numeric(f)) {
            header = Some(record.iter().map(str::to_string).collect::<Vec<_>>());
            width = Some(record.len());
            continue;
        }
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        let mut row = Vec::with_capacity(record.len());
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                CliError::validation(format!(
                    "{}: line {line}, column {}: cannot parse '{field}' as a number",
                    path.display(),
                    j + 1
                ))
            })?;
            if !v.is_finite() {
                return Err(CliError::validation(format!(
                    "{}: line {line}, column {}: non-finite value '{field}'",
                    path.display(),
                    j + 1
                )));
            }
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::validation(format!("{}: no data rows", path.display())));
    }
    let ncols = width.unwrap_or(rows[0].len());
    let mut flat = Vec::with_capacity(rows.len() * ncols);
    for row in rows.iter() {
        flat.extend_from_slice(row);
    }
    let values = Array2::from_shape_vec((rows.len(), ncols), flat).expect("rows have equal length");
    Ok(Table { header, values })
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.kind() {
        csv::ErrorKind::Io(_) => match e.into_kind() {
            csv::ErrorKind::Io(io) => CliError::io(path, io),
            _ => unreachable!(),
        },
        csv::ErrorKind::UnequalLengths { pos, expected_len, len } => CliError::validation(format!(
            "{}: line {}: expected {expected_len} fields, found {len}",
            path.display(),
            pos.as_ref().map_or(0, |p| p.line())
        )),
        _ => CliError::validation(format!("{}: {e}", path.display())),
    }
}

/// Features from every column but the last, responses from the last.
pub fn read_dataset(path: &Path, task: Task) -> Result<Dataset> {
    let table = read_table(path)?;
    let ncols = table.values.ncols();
    if ncols < 2 {
        return Err(CliError::validation(format!(
            "{}: need at least one feature column and a response column",
            path.display()
        )));
    }
    let x = table.values.slice(ndarray::s![.., ..ncols - 1]).to_owned();
    let y = table.values.column(ncols - 1).to_owned();
    Dataset::new(x, y, task).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}

/// Every column as a feature; with `drop_response` the last column is ignored.
pub fn read_features(path: &Path, drop_response: bool) -> Result<Array2<f64>> {
    let table = read_table(path)?;
    let ncols = table.values.ncols();
    if drop_response {
        if ncols < 2 {
            return Err(CliError::validation(format!("{}: no feature columns", path.display())));
        }
        return Ok(table.values.slice(ndarray::s![.., ..ncols - 1]).to_owned());
    }
    Ok(table.values)
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn feature_header(p: usize) -> Vec<String> {
    (0..p).map(|j| format!("x{j}")).collect()
}

/// Writes rows of `(header, values)`; `values` rows must match the header length.
pub fn write_csv(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let io = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::validation(format!("{}: {other:?}", path.display())),
    };
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}

pub fn write_dataset(path: &Path, x: &Array2<f64>, y: &Array1<f64>) -> Result<()> {
    let mut header = feature_header(x.ncols());
    header.push("y".into());
    let rows = x.outer_iter().zip(y.iter()).map(|(row, &v)| {
        let mut out: Vec<String> = row.iter().map(|&a| fmt_f64(a)).collect();
        out.push(fmt_f64(v));
        out
    });
    write_csv(path, &header, rows)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    text.push('\n');
    let mut file = File::create(path).map_err(|e| CliError::io(path, e))?;
    file.write_all(text.as_bytes()).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}
