use std::path::Path;

use ndarray::Array2;

use super::Dataset;
use crate::error::{Error, Result};

/// Column names from the header row.
pub fn csv_header(path: &Path) -> Result<Vec<String>> {
    let file_err = |e: csv::Error| Error::IngestionFile {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(file_err)?;
    Ok(reader
        .headers()
        .map_err(file_err)?
        .iter()
        .map(String::from)
        .collect())
}

/// Reads a comma-separated file with one header row. Columns named in
/// `target_columns` become outputs (in the given order); every other column
/// becomes an input, in file order.
pub fn load_csv(path: &Path, target_columns: &[&str]) -> Result<Dataset> {
    let file_err = |message: String| Error::IngestionFile {
        path: path.to_path_buf(),
        message,
    };
    if target_columns.is_empty() {
        return Err(file_err("at least one target column is required".into()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => file_err(format!("cannot open: {e}")),
            _ => file_err(e.to_string()),
        })?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| file_err(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();

    let mut target_idx = Vec::with_capacity(target_columns.len());
    for name in target_columns {
        let idx = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| file_err(format!("target column `{name}` not in header")))?;
        target_idx.push(idx);
    }
    let feature_idx: Vec<usize> = (0..headers.len())
        .filter(|i| !target_idx.contains(i))
        .collect();
    if feature_idx.is_empty() {
        return Err(file_err(
            "no feature columns left after removing targets".into(),
        ));
    }

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut n = 0;
    for (r, record) in reader.records().enumerate() {
        // 1-based data row, header excluded
        let row = r + 1;
        let record = record.map_err(|e| Error::Ingestion {
            path: path.to_path_buf(),
            row,
            column: "*".into(),
            message: e.to_string(),
        })?;
        if record.len() != headers.len() {
            return Err(Error::Ingestion {
                path: path.to_path_buf(),
                row,
                column: "*".into(),
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        let cell = |j: usize| -> Result<f64> {
            let raw = &record[j];
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Ingestion {
                    path: path.to_path_buf(),
                    row,
                    column: headers[j].clone(),
                    message: format!("`{raw}` is not a finite number"),
                })
        };
        for &j in &feature_idx {
            xs.push(cell(j)?);
        }
        for &j in &target_idx {
            ys.push(cell(j)?);
        }
        n += 1;
    }
    if n == 0 {
        return Err(file_err("no data rows".into()));
    }
    let xs = Array2::from_shape_vec((n, feature_idx.len()), xs)
        .map_err(|e| Error::Dimension(e.to_string()))?;
    let ys = Array2::from_shape_vec((n, target_idx.len()), ys)
        .map_err(|e| Error::Dimension(e.to_string()))?;
    Dataset::new(xs, ys)
}
