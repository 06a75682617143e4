//! CSV ingestion and atomic artifact writes.
//!
//! Data files have a header row, comma separators and `.` decimals. A leading
//! column named `id` holds row identifiers; every other column is numeric.

use std::io::Write;
use std::path::Path;

use bicluster::DataMatrix;

use crate::CliError;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>, CliError> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| io_err(path, e))
}

/// Reads a numeric data matrix, optionally standardizing each column to
/// mean 0 and unit sample standard deviation.
pub fn read_data(path: &Path, standardize: bool) -> Result<DataMatrix<f64>, CliError> {
    let mut rdr = reader(path)?;
    let headers: Vec<String> = rdr.headers().map_err(|e| io_err(path, e))?.iter().map(str::to_string).collect();
    let has_id = headers.first().is_some_and(|h| h == "id");
    let col_ids: Vec<String> = headers[usize::from(has_id)..].to_vec();
    if col_ids.is_empty() {
        return Err(io_err(path, "no data columns"));
    }
    let mut row_ids = Vec::new();
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| io_err(path, e))?;
        let line = i + 2;
        let mut fields = record.iter();
        if has_id {
            row_ids.push(fields.next().unwrap_or_default().to_string());
        }
        let row = fields
            .zip(&col_ids)
            .map(|(tok, col)| {
                tok.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| io_err(path, format!("line {line}, column {col:?}: {tok:?} is not a finite number")))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(io_err(path, "no data rows"));
    }
    if standardize {
        standardize_columns(&mut rows, &col_ids).map_err(|e| io_err(path, e))?;
    }
    let mut data = DataMatrix::from_rows(&rows).map_err(|e| io_err(path, e))?;
    data = data.with_col_ids(col_ids).map_err(|e| io_err(path, e))?;
    if has_id {
        data = data.with_row_ids(row_ids).map_err(|e| io_err(path, e))?;
    }
    Ok(data)
}

fn standardize_columns(rows: &mut [Vec<f64>], names: &[String]) -> Result<(), String> {
    let n = rows.len();
    if n < 2 {
        return Err("standardizing needs at least two rows".into());
    }
    for (v, name) in names.iter().enumerate() {
        let mean = rows.iter().map(|r| r[v]).sum::<f64>() / n as f64;
        let var = rows.iter().map(|r| (r[v] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        if !(var > 0.0) {
            return Err(format!("column {name:?} is constant and cannot be standardized"));
        }
        let sd = var.sqrt();
        for r in rows.iter_mut() {
            r[v] = (r[v] - mean) / sd;
        }
    }
    Ok(())
}

/// Integer labels from the `label` column, or the last column if none is named so.
pub fn read_labels(path: &Path) -> Result<Vec<i64>, CliError> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| io_err(path, e))?.clone();
    let col = headers.iter().position(|h| h == "label").unwrap_or(headers.len().saturating_sub(1));
    let mut labels = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| io_err(path, e))?;
        let tok = record.get(col).unwrap_or_default();
        labels.push(
            tok.parse::<i64>()
                .map_err(|_| io_err(path, format!("line {}: label {tok:?} is not an integer", i + 2)))?,
        );
    }
    if labels.is_empty() {
        return Err(io_err(path, "no labels"));
    }
    Ok(labels)
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so the file is either complete or absent.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(dir, e))?;
    tmp.write_all(contents).map_err(|e| io_err(path, e))?;
    tmp.as_file().sync_all().map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

/// Serializes rows of already-formatted cells.
pub fn csv_bytes(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let map = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(header).map_err(map)?;
    for row in rows {
        w.write_record(&row).map_err(map)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

pub fn data_csv(data: &DataMatrix<f64>) -> Result<Vec<u8>, CliError> {
    let mut header = vec!["id".to_string()];
    header.extend(column_names(data));
    let rows = (0..data.n()).map(|i| {
        let mut row = vec![row_name(data, i)];
        row.extend(data.row(i).iter().map(|x| x.to_string()));
        row
    });
    csv_bytes(&header, rows)
}

pub fn column_names(data: &DataMatrix<f64>) -> Vec<String> {
    match data.col_ids() {
        Some(ids) => ids.to_vec(),
        None => (1..=data.p()).map(|v| format!("V{v}")).collect(),
    }
}

pub fn row_name(data: &DataMatrix<f64>, i: usize) -> String {
    match data.row_ids() {
        Some(ids) => ids[i].clone(),
        None => (i + 1).to_string(),
    }
}
