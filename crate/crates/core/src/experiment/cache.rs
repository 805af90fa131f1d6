use std::path::{Path, PathBuf};

use crate::codebook::Codebook;
use crate::error::Result;
use crate::scalar::Scalar;

use super::features::{read_feature_csv, write_feature_csv};
use super::DescriptorSpec;

/// On-disk store of extracted features and trained codebooks.
///
/// Files are keyed by descriptor id, parameter hash and, for trained
/// descriptors, fold and seed; every write is atomic, so concurrent writers
/// of distinct keys never interfere.
#[derive(Debug, Clone)]
pub struct FeatureCache {
    dir: PathBuf,
}

impl FeatureCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        FeatureCache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn key(spec: &DescriptorSpec, fold: Option<(usize, u64)>) -> String {
        match fold {
            Some((f, seed)) => format!("{}-{}-fold{f}-seed{seed}", spec.id, spec.params_hash()),
            None => format!("{}-{}", spec.id, spec.params_hash()),
        }
    }

    pub fn features_path(&self, spec: &DescriptorSpec, fold: Option<(usize, u64)>) -> PathBuf {
        self.dir.join("features").join(format!("{}.csv", Self::key(spec, fold)))
    }

    pub fn codebook_path(&self, spec: &DescriptorSpec, fold: usize, seed: u64, index: usize) -> PathBuf {
        self.dir
            .join("codebooks")
            .join(format!("{}-{index}.csv", Self::key(spec, Some((fold, seed)))))
    }

    /// Cached rows, if present and keyed by exactly `keys` in order.
    pub fn load_features<T: Scalar>(&self, path: &Path, keys: &[String]) -> Option<Vec<Vec<T>>> {
        if !path.is_file() {
            return None;
        }
        match read_feature_csv::<T>(path) {
            Ok(rows) if rows.len() == keys.len() && rows.iter().zip(keys).all(|(r, k)| &r.0 == k) => {
                log::debug!("feature cache hit {}", path.display());
                Some(rows.into_iter().map(|r| r.1).collect())
            }
            Ok(_) => {
                log::warn!("ignoring stale feature cache {}", path.display());
                None
            }
            Err(e) => {
                log::warn!("ignoring unreadable feature cache {}: {e}", path.display());
                None
            }
        }
    }

    pub fn store_features<T: Scalar>(&self, path: &Path, keys: &[String], rows: &[Vec<T>]) -> Result<()> {
        write_feature_csv(path, keys, rows)
    }

    pub fn load_codebooks<T: Scalar>(&self, spec: &DescriptorSpec, fold: usize, seed: u64, count: usize) -> Option<Vec<Codebook<T>>> {
        (0..count)
            .map(|j| Codebook::load(self.codebook_path(spec, fold, seed, j)).ok())
            .collect()
    }

    pub fn store_codebooks<T: Scalar>(&self, spec: &DescriptorSpec, fold: usize, seed: u64, cbs: &[&Codebook<T>]) -> Result<()> {
        for (j, cb) in cbs.iter().enumerate() {
            cb.save(self.codebook_path(spec, fold, seed, j))?;
        }
        Ok(())
    }
}
