//! CSV dataset loading.

use std::path::Path;

use crate::cocoa::Dataset;
use crate::error::{Error, Result};

/// Feature preprocessing applied after loading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scaling {
    /// Every example scaled to unit norm.
    #[default]
    Unit,
    /// `ln(1 + v)` on every feature, then unit norm.
    Log1pUnit,
    None,
}

fn bad_row(row: usize, message: impl Into<String>) -> Error {
    Error::Dataset {
        row,
        message: message.into(),
    }
}

/// Parses CSV text: one example per row, numeric features, label last.
/// Rows are counted from 1. Labels that are all 0 or 1 become -1 / +1.
pub fn parse_dataset<R: std::io::Read>(reader: R, scaling: Scaling) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut width = None;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| bad_row(row, e.to_string()))?;
        if rec.len() < 2 {
            return Err(bad_row(row, "need at least one feature and a label"));
        }
        match width {
            None => width = Some(rec.len()),
            Some(w) if w != rec.len() => {
                return Err(bad_row(row, format!("{} fields, expected {w}", rec.len())));
            }
            _ => {}
        }
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| bad_row(row, format!("field {} is not numeric: {field:?}", j + 1)))?;
            if !v.is_finite() {
                return Err(bad_row(row, format!("field {} is not finite", j + 1)));
            }
            if j + 1 == rec.len() {
                labels.push(v);
            } else {
                features.push(v);
            }
        }
    }
    let m = width.ok_or_else(|| bad_row(0, "no rows"))? - 1;
    if labels.iter().all(|&y| y == 0.0 || y == 1.0) {
        labels.iter_mut().for_each(|y| *y = 2.0 * *y - 1.0);
    }
    let mut data = Dataset::new(m, features, labels)?;
    match scaling {
        Scaling::Unit => data.normalize_columns(),
        Scaling::Log1pUnit => {
            data.log1p_features()?;
            data.normalize_columns();
        }
        Scaling::None => {}
    }
    Ok(data)
}

/// Loads a dataset file.
pub fn load_dataset(path: &Path, scaling: Scaling) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_dataset(std::io::BufReader::new(file), scaling)
}
