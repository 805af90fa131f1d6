use std::collections::HashMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::DatasetManifest;

fn ingest(msg: impl Into<String>) -> Error {
    Error::Ingestion(msg.into())
}

/// Reads a `path,f0,f1,...` file into `(path, vector)` rows in file order.
/// Rows must all have the header's width.
pub fn read_feature_csv<T: Scalar>(path: &Path) -> Result<Vec<(String, Vec<T>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| ingest(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| ingest(format!("{}: {e}", path.display())))?
        .clone();
    if headers.get(0) != Some("path") || headers.len() < 2 {
        return Err(ingest(format!(
            "{}: header must be `path,f0,f1,...`",
            path.display()
        )));
    }
    let width = headers.len() - 1;
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| ingest(format!("{} line {line}: {e}", path.display())))?;
        let key = rec.get(0).unwrap_or_default().to_string();
        if rec.len() - 1 != width {
            return Err(ingest(format!(
                "{} line {line} ({key}): {} values, expected {width}",
                path.display(),
                rec.len() - 1
            )));
        }
        let values = rec
            .iter()
            .skip(1)
            .map(|v| {
                v.trim()
                    .parse::<T>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| ingest(format!("{} line {line} ({key}): bad value {v:?}", path.display())))
            })
            .collect::<Result<Vec<T>>>()?;
        rows.push((key, values));
    }
    Ok(rows)
}

/// Writes rows in the same format, values in shortest round-trip form.
pub fn write_feature_csv<T: Scalar>(path: &Path, keys: &[String], rows: &[Vec<T>]) -> Result<()> {
    let width = rows.first().map_or(0, |r| r.len());
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    let mut header = vec!["path".to_string()];
    header.extend((0..width).map(|i| format!("f{i}")));
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(&header).map_err(csv_err)?;
    for (k, r) in keys.iter().zip(rows) {
        let mut rec = Vec::with_capacity(r.len() + 1);
        rec.push(k.clone());
        rec.extend(r.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    crate::io::write_atomic(path, &bytes)
}

/// Per-image vectors from an external extractor, aligned to manifest order.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalFeatureSet<T> {
    pub source_id: String,
    pub dim: usize,
    pub vectors: Vec<Vec<T>>,
}

/// Aligns a feature file to the manifest by relative path. Missing,
/// duplicated, unknown or ragged rows are ingestion errors naming the row.
pub fn import_external_features<T: Scalar>(
    source_id: &str,
    path: &Path,
    manifest: &DatasetManifest,
) -> Result<ExternalFeatureSet<T>> {
    let rows = read_feature_csv::<T>(path)?;
    let index: HashMap<&str, usize> = manifest
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| (e.path.as_str(), i))
        .collect();
    let mut vectors: Vec<Option<Vec<T>>> = vec![None; manifest.len()];
    for (n, (key, v)) in rows.into_iter().enumerate() {
        let line = n + 2;
        let &i = index.get(key.as_str()).ok_or_else(|| {
            ingest(format!("{} line {line}: {key:?} is not in the dataset", path.display()))
        })?;
        if vectors[i].replace(v).is_some() {
            return Err(ingest(format!("{} line {line}: duplicate row for {key:?}", path.display())));
        }
    }
    let vectors = vectors
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            v.ok_or_else(|| ingest(format!("{}: no row for {}", path.display(), manifest.entries[i].path)))
        })
        .collect::<Result<Vec<_>>>()?;
    let dim = vectors.first().map_or(0, |v| v.len());
    Ok(ExternalFeatureSet {
        source_id: source_id.to_string(),
        dim,
        vectors,
    })
}

/// Resolves a feature path that may contain a `{fold}` placeholder.
pub fn fold_path(template: &Path, fold: usize) -> PathBuf {
    PathBuf::from(template.to_string_lossy().replace("{fold}", &fold.to_string()))
}

pub fn is_per_fold(template: &Path) -> bool {
    template.to_string_lossy().contains("{fold}")
}
