//! RFC-4180 matrix I/O with 17 significant digits.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use wsp::covariance::DataMatrix;
use wsp::Matrix;

use crate::error::{CliError, Result};

/// `v` in scientific notation with 17 significant digits.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Reads a numeric CSV into an `n × p` data matrix. With `header` the first
/// record is skipped. Errors carry 1-based file positions.
pub fn read_data_matrix(path: &Path, header: bool) -> Result<DataMatrix> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(true)
        .from_reader(file);
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let row = e.position().map_or(0, |p| p.line() as usize);
            CliError::Data {
                path: path.to_path_buf(),
                row,
                column: 0,
                message: e.to_string(),
            }
        })?;
        let row = record.position().map_or(rows + 1, |p| p.line() as usize);
        let data_error = |column: usize, message: String| CliError::Data {
            path: path.to_path_buf(),
            row,
            column,
            message,
        };
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(data_error(
                    record.len().min(w) + 1,
                    format!("expected {w} fields, found {}", record.len()),
                ));
            }
            _ => {}
        }
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| data_error(j + 1, format!("cannot parse {cell:?} as a number")))?;
            if !v.is_finite() {
                return Err(data_error(j + 1, format!("non-finite value {cell:?}")));
            }
            values.push(v);
        }
        rows += 1;
    }
    let p = width.unwrap_or(0);
    if rows == 0 || p == 0 {
        return Err(CliError::Data {
            path: path.to_path_buf(),
            row: 1,
            column: 1,
            message: "no data".into(),
        });
    }
    let m = Matrix::from_vec(rows, p, values);
    DataMatrix::new(m).map_err(|e| CliError::Data {
        path: path.to_path_buf(),
        row: 1,
        column: 1,
        message: e.to_string(),
    })
}

/// Writes `m` row-major; `header` adds a first record of column names.
pub fn write_matrix(path: &Path, m: &Matrix, header: Option<&[String]>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e.into()))?;
    let io = |e: csv::Error| CliError::io(path, e.into());
    if let Some(names) = header {
        writer.write_record(names).map_err(io)?;
    }
    for i in 0..m.rows() {
        writer
            .write_record(m.row(i).iter().map(|&v| format_f64(v)))
            .map_err(io)?;
    }
    writer.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut file = File::create(path).map_err(|e| CliError::io(path, e))?;
    file.write_all(text.as_bytes()).map_err(|e| CliError::io(path, e))
}
