//! CSV ingestion of response series.
//!
//! The file needs a header row naming its columns. `y` is required; `z`
//! (segmented covariate), `label` and `b` (item difficulties) are optional and
//! any other column is ignored. A file with a single unnamed numeric column is
//! read as a bare response vector.

use std::fs;
use std::path::Path;

use segpower_core::Series;
use thiserror::Error;

pub const MIN_LEN: usize = 4;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing required column `y`")]
    MissingResponse,
    #[error("row {row}: expected {expected} fields, found {found}")]
    Ragged { row: u64, expected: usize, found: usize },
    #[error("row {row}, column `{column}`: empty cell")]
    Blank { row: u64, column: String },
    #[error("row {row}, column `{column}`: `{value}` is not a finite number")]
    NotNumeric { row: u64, column: String, value: String },
    #[error("series has {n} observations, need at least {MIN_LEN}")]
    TooShort { n: usize },
}

pub fn ingest_series(path: &Path) -> Result<Series, IngestError> {
    let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_series(&text)
}

pub fn parse_series(text: &str) -> Result<Series, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let Some(header) = records.next().transpose()? else {
        return Err(IngestError::TooShort { n: 0 });
    };
    let names: Vec<String> = header.iter().map(|h| h.to_ascii_lowercase()).collect();

    let headerless = names.len() == 1 && names[0].parse::<f64>().is_ok();
    let names = if headerless { vec!["y".to_string()] } else { names };
    let find = |name: &str| names.iter().position(|c| c == name);
    let y_col = find("y").ok_or(IngestError::MissingResponse)?;
    let (z_col, label_col, b_col) = (find("z"), find("label"), find("b"));

    let mut y = Vec::new();
    let mut z = Vec::new();
    let mut b = Vec::new();
    let mut labels = Vec::new();
    let first = if headerless { Some(Ok(header)) } else { None };
    for record in first.into_iter().chain(records) {
        let record = record?;
        let row = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != names.len() {
            return Err(IngestError::Ragged {
                row,
                expected: names.len(),
                found: record.len(),
            });
        }
        let number = |col: usize| -> Result<f64, IngestError> {
            let cell = &record[col];
            if cell.is_empty() {
                return Err(IngestError::Blank { row, column: names[col].clone() });
            }
            cell.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| IngestError::NotNumeric {
                    row,
                    column: names[col].clone(),
                    value: cell.to_string(),
                })
        };
        y.push(number(y_col)?);
        if let Some(c) = z_col {
            z.push(number(c)?);
        }
        if let Some(c) = b_col {
            b.push(number(c)?);
        }
        if let Some(c) = label_col {
            if record[c].is_empty() {
                return Err(IngestError::Blank { row, column: names[c].clone() });
            }
            labels.push(record[c].to_string());
        }
    }

    if y.len() < MIN_LEN {
        return Err(IngestError::TooShort { n: y.len() });
    }
    let mut series = Series::new(y);
    if label_col.is_some() {
        series = series.with_labels(labels);
    }
    if z_col.is_some() {
        series = series.with_z(z);
    }
    if b_col.is_some() {
        series = series.with_difficulties(b);
    }
    Ok(series)
}
