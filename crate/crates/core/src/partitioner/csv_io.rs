use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fl_core::Dataset;

fn csv_error(path: &Path, line: u64, column: &str, message: impl Into<String>) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        line,
        column: column.to_string(),
        message: message.into(),
    }
}

/// Reads a headed, comma-separated file. Every column other than
/// `label_column` is a numeric feature, in header order. Integer labels are
/// remapped to dense ids in order of first appearance.
pub fn load_csv_dataset(path: impl AsRef<Path>, label_column: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let headers = reader
        .headers()
        .map_err(|e| csv_error(path, 1, "", e.to_string()))?
        .clone();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| csv_error(path, 1, label_column, "missing label column"))?;
    let num_features = headers.len() - 1;
    if num_features == 0 {
        return Err(csv_error(path, 1, "", "no feature columns"));
    }

    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut dense: HashMap<i64, usize> = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            csv_error(path, line, "", e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        for (col, cell) in record.iter().enumerate() {
            let name = &headers[col];
            if col == label_idx {
                let raw: i64 = cell.parse().map_err(|_| {
                    csv_error(path, line, name, format!("label `{cell}` is not an integer"))
                })?;
                let next = dense.len();
                labels.push(*dense.entry(raw).or_insert(next));
            } else {
                let value: f64 = cell
                    .parse()
                    .ok()
                    .filter(|v: &f64| v.is_finite())
                    .ok_or_else(|| {
                        csv_error(path, line, name, format!("`{cell}` is not a finite number"))
                    })?;
                features.push(value);
            }
        }
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Dataset::new(features, num_features, labels)
}

/// Writes `data` as `f0,…,f{k-1},label`. Values use the shortest decimal form
/// that parses back to the same `f64`.
pub fn write_csv_dataset(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let to_err = |e: csv::Error| Error::Other(format!("{}: {e}", path.display()));
    let mut writer = csv::Writer::from_path(path).map_err(to_err)?;
    let mut header: Vec<String> = (0..data.num_features()).map(|j| format!("f{j}")).collect();
    header.push("label".into());
    writer.write_record(&header).map_err(to_err)?;
    for i in 0..data.len() {
        let mut row: Vec<String> = data.row(i).iter().map(|v| v.to_string()).collect();
        row.push(data.labels()[i].to_string());
        writer.write_record(&row).map_err(to_err)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}
