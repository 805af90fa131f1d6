use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::filters::dtg_bank;
use crate::image::{load_image, GrayImage};
use crate::scalar::Scalar;
use crate::svm::{accuracy, train_multiclass, ScoreMatrix, SvmParams};

use super::descriptor::{hex, DescriptorKind, Trained};
use super::{DatasetManifest, DescriptorSpec, FeatureCache};

/// Digests of everything that fed the trained objects of one fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAudit {
    pub fold: usize,
    pub train_paths: Vec<String>,
    /// Paths and pixels of the images the codebooks were trained on.
    pub codebook_inputs_digest: Option<String>,
    /// Paths, labels and feature values the standardizer and SVMs saw.
    pub svm_inputs_digest: String,
}

/// Cross-validated result of one classifier.
#[derive(Debug, Clone)]
pub struct CvResult<T> {
    pub id: String,
    pub fold_accuracy: Vec<f64>,
    pub mean_accuracy: f64,
    /// Test-split scores per fold, rows in manifest order.
    pub fold_scores: Vec<ScoreMatrix<T>>,
    pub audits: Vec<FoldAudit>,
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Per-fold generator seed.
pub fn fold_seed(seed: u64, fold: usize) -> u64 {
    seed ^ (fold as u64 + 1).wrapping_mul(0xD6E8_FEB8_6659_FD93)
}

/// Decodes every manifest image, in manifest order.
pub fn load_images<T: Scalar>(manifest: &DatasetManifest) -> Result<Vec<GrayImage<T>>> {
    (0..manifest.len())
        .into_par_iter()
        .map(|i| load_image(manifest.absolute_path(i)))
        .collect()
}

pub fn image_digest<T: Scalar>(paths: &[String], images: &[&GrayImage<T>]) -> String {
    let mut h = Sha256::new();
    for (p, img) in paths.iter().zip(images) {
        h.update(p.as_bytes());
        h.update([0]);
        h.update((img.width() as u64).to_le_bytes());
        h.update((img.height() as u64).to_le_bytes());
        for v in img.pixels() {
            h.update(v.as_f64().to_le_bytes());
        }
    }
    hex(&h.finalize())
}

pub fn feature_digest<T: Scalar>(paths: &[String], labels: &[usize], rows: &[Vec<T>]) -> String {
    let mut h = Sha256::new();
    for ((p, l), r) in paths.iter().zip(labels).zip(rows) {
        h.update(p.as_bytes());
        h.update([0]);
        h.update((*l as u64).to_le_bytes());
        for v in r {
            h.update(v.as_f64().to_le_bytes());
        }
    }
    hex(&h.finalize())
}

fn extraction_error(spec: &DescriptorSpec, path: &str, e: Error) -> Error {
    Error::Extraction {
        descriptor: spec.id.clone(),
        path: path.to_string(),
        source: Box::new(e),
    }
}

fn extract_all<T: Scalar>(
    manifest: &DatasetManifest,
    images: &[GrayImage<T>],
    spec: &DescriptorSpec,
    trained: &Trained<T>,
) -> Result<Vec<Vec<T>>> {
    images
        .par_iter()
        .enumerate()
        .map(|(i, img)| {
            spec.extract(img, trained)
                .map(|f| f.values)
                .map_err(|e| extraction_error(spec, &manifest.entries[i].path, e))
        })
        .collect()
}

fn trained_from_codebooks<T: Scalar>(spec: &DescriptorSpec, mut cbs: Vec<crate::codebook::Codebook<T>>) -> Result<Trained<T>> {
    Ok(match &spec.kind {
        DescriptorKind::Sclbp { .. } => Trained::Sclbp(cbs),
        DescriptorKind::Jet { sigma, .. } => Trained::Jet(cbs.remove(0), dtg_bank(*sigma)?),
        _ => Trained::None,
    })
}

fn codebook_count(spec: &DescriptorSpec) -> usize {
    match &spec.kind {
        DescriptorKind::Sclbp { radii, .. } => radii.len(),
        DescriptorKind::Jet { .. } => 1,
        _ => 0,
    }
}

/// Features of every manifest image for one descriptor. Trained descriptors
/// learn their codebooks from the training split of `fold` only; the result
/// is read from and written to `cache` when one is given.
pub fn descriptor_features<T: Scalar>(
    manifest: &DatasetManifest,
    images: &[GrayImage<T>],
    spec: &DescriptorSpec,
    fold: usize,
    seed: u64,
    cache: Option<&FeatureCache>,
) -> Result<(Vec<Vec<T>>, Option<String>)> {
    let keys = manifest.paths();
    let trained_key = spec.needs_training().then(|| (fold, fold_seed(seed, fold)));
    let (train, _) = manifest.split(fold);
    let train_imgs: Vec<&GrayImage<T>> = train.iter().map(|&i| &images[i]).collect();
    let train_paths: Vec<String> = train.iter().map(|&i| keys[i].clone()).collect();
    let cb_digest = spec.needs_training().then(|| image_digest(&train_paths, &train_imgs));

    let path = cache.map(|c| c.features_path(spec, trained_key));
    if let (Some(c), Some(p)) = (cache, &path) {
        if let Some(rows) = c.load_features::<T>(p, &keys) {
            return Ok((rows, cb_digest));
        }
    }
    let trained = match trained_key {
        None => Trained::None,
        Some((f, s)) => {
            let cached = cache.and_then(|c| c.load_codebooks::<T>(spec, f, s, codebook_count(spec)));
            match cached {
                Some(cbs) => trained_from_codebooks(spec, cbs)?,
                None => {
                    log::info!("training {} codebooks for fold {f}", spec.id);
                    let t = spec.train(&train_imgs, s)?;
                    if let Some(c) = cache {
                        c.store_codebooks(spec, f, s, &t.codebooks())?;
                    }
                    t
                }
            }
        }
    };
    let rows = extract_all(manifest, images, spec, &trained)?;
    if let (Some(c), Some(p)) = (cache, &path) {
        c.store_features(p, &keys, &rows)?;
    }
    Ok((rows, cb_digest))
}

/// Trains on the training split of `fold` and scores its test split.
pub fn evaluate_fold<T: Scalar>(
    manifest: &DatasetManifest,
    id: &str,
    features: &[Vec<T>],
    fold: usize,
    svm: &SvmParams,
) -> Result<(ScoreMatrix<T>, f64, FoldAudit)> {
    let (train, test) = manifest.split(fold);
    let labels = manifest.labels();
    let keys = manifest.paths();
    let x: Vec<Vec<T>> = train.iter().map(|&i| features[i].clone()).collect();
    let y: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
    let train_paths: Vec<String> = train.iter().map(|&i| keys[i].clone()).collect();
    let svm_inputs_digest = feature_digest(&train_paths, &y, &x);
    let model = train_multiclass(&x, &y, &manifest.class_labels, svm)?;
    let tx: Vec<Vec<T>> = test.iter().map(|&i| features[i].clone()).collect();
    let tkeys: Vec<String> = test.iter().map(|&i| keys[i].clone()).collect();
    let scores = model.score(&tx, tkeys, id)?;
    let truth: Vec<usize> = test.iter().map(|&i| labels[i]).collect();
    let acc = accuracy(&scores.predictions(), &truth);
    Ok((
        scores,
        acc,
        FoldAudit {
            fold,
            train_paths,
            codebook_inputs_digest: None,
            svm_inputs_digest,
        },
    ))
}

fn collect_folds<T: Scalar>(id: &str, per_fold: Vec<(ScoreMatrix<T>, f64, FoldAudit)>) -> CvResult<T> {
    let mut fold_scores = Vec::with_capacity(per_fold.len());
    let mut fold_accuracy = Vec::with_capacity(per_fold.len());
    let mut audits = Vec::with_capacity(per_fold.len());
    for (s, a, au) in per_fold {
        fold_scores.push(s);
        fold_accuracy.push(a);
        audits.push(au);
    }
    CvResult {
        id: id.to_string(),
        mean_accuracy: mean(&fold_accuracy),
        fold_accuracy,
        fold_scores,
        audits,
    }
}

/// Cross-validates one descriptor: per fold, codebooks (if any), the
/// standardizer and the SVMs see the training split only.
pub fn run_descriptor_cv<T: Scalar>(
    manifest: &DatasetManifest,
    images: &[GrayImage<T>],
    spec: &DescriptorSpec,
    svm: &SvmParams,
    seed: u64,
    cache: Option<&FeatureCache>,
) -> Result<CvResult<T>> {
    spec.validate()?;
    if images.len() != manifest.len() {
        return Err(Error::Contract(format!(
            "{} images for {} manifest entries",
            images.len(),
            manifest.len()
        )));
    }
    let shared = if spec.needs_training() {
        None
    } else {
        Some(descriptor_features(manifest, images, spec, 0, seed, cache)?.0)
    };
    let per_fold = (0..manifest.folds)
        .into_par_iter()
        .map(|fold| {
            let (owned, cb_digest);
            let features = match &shared {
                Some(f) => {
                    cb_digest = None;
                    f
                }
                None => {
                    (owned, cb_digest) = descriptor_features(manifest, images, spec, fold, seed, cache)?;
                    &owned
                }
            };
            let (s, a, mut audit) = evaluate_fold(manifest, &spec.id, features, fold, svm)?;
            audit.codebook_inputs_digest = cb_digest;
            log::info!("{} fold {fold}: {a:.2}%", spec.id);
            Ok((s, a, audit))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(collect_folds(&spec.id, per_fold))
}

/// Cross-validates an SVM on externally supplied features; `features(fold)`
/// returns manifest-ordered vectors to use for that fold.
pub fn run_feature_cv<T: Scalar>(
    manifest: &DatasetManifest,
    id: &str,
    features: impl Fn(usize) -> Result<Vec<Vec<T>>> + Sync,
    svm: &SvmParams,
) -> Result<CvResult<T>> {
    let per_fold = (0..manifest.folds)
        .into_par_iter()
        .map(|fold| evaluate_fold(manifest, id, &features(fold)?, fold, svm))
        .collect::<Result<Vec<_>>>()?;
    Ok(collect_folds(id, per_fold))
}
