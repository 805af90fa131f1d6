use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const DEFAULT_FOLDS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    /// `/`-separated path relative to the dataset root.
    pub path: String,
    /// Index into [`DatasetManifest::class_labels`].
    pub label: usize,
    pub fold: usize,
}

/// Every image of the dataset with its class and cross-validation fold.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub class_labels: Vec<String>,
    pub entries: Vec<ManifestEntry>,
    pub folds: usize,
}

fn manifest_err(msg: impl Into<String>) -> Error {
    Error::Manifest(msg.into())
}

/// Sorted `(class, relative path)` pairs of `<root>/<class>/*.png`.
fn scan_root(root: &Path) -> Result<BTreeMap<String, Vec<String>>> {
    if !root.is_dir() {
        return Err(Error::DatasetMissing(root.to_path_buf()));
    }
    let mut classes = BTreeMap::new();
    for entry in fs::read_dir(root)? {
        let entry = entry?;
        if !entry.file_type()?.is_dir() {
            continue;
        }
        let class = entry
            .file_name()
            .into_string()
            .map_err(|n| manifest_err(format!("class directory {n:?} is not UTF-8")))?;
        let mut files = Vec::new();
        for f in fs::read_dir(entry.path())? {
            let f = f?;
            let name = f.file_name();
            let name = name.to_string_lossy();
            if f.file_type()?.is_file() && name.to_ascii_lowercase().ends_with(".png") {
                files.push(format!("{class}/{name}"));
            }
        }
        if files.is_empty() {
            return Err(manifest_err(format!("class directory {class:?} contains no PNG images")));
        }
        files.sort();
        classes.insert(class, files);
    }
    if classes.len() < 2 {
        return Err(manifest_err(format!(
            "{} holds {} class directories; at least two are required",
            root.display(),
            classes.len()
        )));
    }
    Ok(classes)
}

impl DatasetManifest {
    /// Scans `root`. Folds come from `folds_file` when given, otherwise from
    /// a stratified assignment with `seed`.
    pub fn load(root: impl AsRef<Path>, folds_file: Option<&Path>, folds: usize, seed: u64) -> Result<Self> {
        let root = root.as_ref();
        let classes = scan_root(root)?;
        let class_labels: Vec<String> = classes.keys().cloned().collect();
        let mut entries: Vec<ManifestEntry> = classes
            .values()
            .enumerate()
            .flat_map(|(label, files)| {
                files.iter().map(move |p| ManifestEntry {
                    path: p.clone(),
                    label,
                    fold: 0,
                })
            })
            .collect();
        let folds = match folds_file {
            Some(f) => assign_from_file(&mut entries, f)?,
            None => {
                stratify(&mut entries, class_labels.len(), folds, seed)?;
                folds
            }
        };
        let m = DatasetManifest {
            root: root.to_path_buf(),
            class_labels,
            entries,
            folds,
        };
        m.validate()?;
        Ok(m)
    }

    /// Every fold non-empty and every class present in every training split.
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(manifest_err(format!("need at least 2 folds, got {}", self.folds)));
        }
        let mut per_fold = vec![0usize; self.folds];
        let mut per_class_fold = vec![vec![0usize; self.folds]; self.class_labels.len()];
        for e in &self.entries {
            if e.fold >= self.folds || e.label >= self.class_labels.len() {
                return Err(manifest_err(format!("entry {} has an out-of-range fold or label", e.path)));
            }
            per_fold[e.fold] += 1;
            per_class_fold[e.label][e.fold] += 1;
        }
        if let Some(f) = per_fold.iter().position(|&n| n == 0) {
            return Err(manifest_err(format!("fold {f} is empty")));
        }
        for (c, counts) in per_class_fold.iter().enumerate() {
            let total: usize = counts.iter().sum();
            if let Some(f) = counts.iter().position(|&n| n == total) {
                return Err(manifest_err(format!(
                    "class {:?} is absent from the training split of fold {f}",
                    self.class_labels[c]
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.label).collect()
    }

    pub fn paths(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.path.clone()).collect()
    }

    pub fn absolute_path(&self, i: usize) -> PathBuf {
        self.root.join(&self.entries[i].path)
    }

    /// `(train, test)` entry indices of a fold, each in manifest order.
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        (0..self.entries.len()).partition(|&i| self.entries[i].fold != fold)
    }

    /// One `path<TAB>fold` line per entry.
    pub fn folds_file_text(&self) -> String {
        let mut s = String::new();
        for e in &self.entries {
            writeln!(s, "{}\t{}", e.path, e.fold).expect("write to string");
        }
        s
    }

    pub fn write_folds_file(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_atomic(path.as_ref(), self.folds_file_text().as_bytes())
    }
}

/// Shuffles each class with the seeded generator and deals its images
/// round-robin into folds, starting where the previous class stopped so fold
/// sizes stay within one of each other.
fn stratify(entries: &mut [ManifestEntry], classes: usize, folds: usize, seed: u64) -> Result<()> {
    if folds < 2 {
        return Err(manifest_err(format!("need at least 2 folds, got {folds}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut offset = 0;
    for c in 0..classes {
        let mut idx: Vec<usize> = (0..entries.len()).filter(|&i| entries[i].label == c).collect();
        idx.shuffle(&mut rng);
        for (rank, &i) in idx.iter().enumerate() {
            entries[i].fold = (offset + rank) % folds;
        }
        offset = (offset + idx.len()) % folds;
    }
    Ok(())
}

fn assign_from_file(entries: &mut [ManifestEntry], path: &Path) -> Result<usize> {
    let text = fs::read_to_string(path)
        .map_err(|e| manifest_err(format!("cannot read folds file {}: {e}", path.display())))?;
    let index: HashMap<&str, usize> = entries.iter().enumerate().map(|(i, e)| (e.path.as_str(), i)).collect();
    let mut assigned: Vec<Option<usize>> = vec![None; entries.len()];
    for (ln, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (p, f) = line
            .rsplit_once('\t')
            .ok_or_else(|| manifest_err(format!("folds file line {}: expected `path<TAB>fold`", ln + 1)))?;
        let fold: usize = f
            .trim()
            .parse()
            .map_err(|_| manifest_err(format!("folds file line {}: bad fold index {f:?}", ln + 1)))?;
        let &i = index
            .get(p)
            .ok_or_else(|| manifest_err(format!("folds file lists {p:?}, which is not in the dataset")))?;
        if assigned[i].replace(fold).is_some() {
            return Err(manifest_err(format!("folds file lists {p:?} twice")));
        }
    }
    for (e, a) in entries.iter_mut().zip(&assigned) {
        e.fold = a.ok_or_else(|| manifest_err(format!("folds file has no fold for {}", e.path)))?;
    }
    Ok(entries.iter().map(|e| e.fold).max().map_or(0, |m| m + 1))
}
