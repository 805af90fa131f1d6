//! Subcommand implementations. Every step reads what earlier steps left in
//! the output directory and skips work whose artifacts already exist.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use texfuse::experiment::{
    descriptor_features, fold_path, import_external_features, is_per_fold, load_images, run_descriptor_cv,
    run_feature_cv, run_fusion_experiment, AccuracyRow, CvResult, DatasetManifest, ExperimentReport, FeatureCache,
};
use texfuse::svm::ScoreMatrix;
use texfuse::{Error, Image, Result};

use crate::config::RunConfig;

const ACCURACY_FILE: &str = "accuracy.txt";
const STAMP_FILE: &str = "inputs.txt";

/// Everything a stored result depends on besides the image pixels.
fn stamp(cfg: &RunConfig, m: &DatasetManifest, source: &str) -> String {
    let folds = Sha256::digest(m.folds_file_text().as_bytes());
    let folds: String = folds.iter().map(|b| format!("{b:02x}")).collect();
    format!("{source}\nseed {}\nfolds {folds}\nsvm {:?}\n", cfg.seed, cfg.svm)
}

fn manifest(cfg: &RunConfig) -> Result<DatasetManifest> {
    let m = DatasetManifest::load(&cfg.dataset, cfg.folds_file.as_deref(), cfg.folds, cfg.seed)?;
    let folds = cfg.output.join("folds.tsv");
    if !folds.is_file() || fs::read_to_string(&folds)? != m.folds_file_text() {
        m.write_folds_file(&folds)?;
    }
    log::info!(
        "{} images, {} classes, {} folds",
        m.len(),
        m.class_labels.len(),
        m.folds
    );
    Ok(m)
}

fn images(m: &DatasetManifest) -> Result<Vec<Image>> {
    load_images(m)
}

pub fn extract(cfg: &RunConfig) -> Result<()> {
    let m = manifest(cfg)?;
    let imgs = images(&m)?;
    let cache = FeatureCache::new(cfg.cache_dir());
    for spec in &cfg.descriptors {
        let folds: Vec<usize> = if spec.needs_training() { (0..m.folds).collect() } else { vec![0] };
        for f in folds {
            descriptor_features(&m, &imgs, spec, f, cfg.seed, Some(&cache))?;
        }
        println!("extracted {}", spec.id);
    }
    Ok(())
}

fn write_row(path: &Path, row: &AccuracyRow) -> Result<()> {
    let mut s = row.mean.to_string();
    for f in &row.folds {
        s.push(' ');
        s.push_str(&f.to_string());
    }
    s.push('\n');
    texfuse::io::write_atomic(path, s.as_bytes())
}

fn read_row(id: &str, path: &Path) -> Result<AccuracyRow> {
    let text = fs::read_to_string(path)?;
    let nums = text
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::Parse {
            what: path.display().to_string(),
            message: e.to_string(),
        })?;
    let (&mean, folds) = nums.split_first().ok_or_else(|| Error::Parse {
        what: path.display().to_string(),
        message: "empty accuracy file".into(),
    })?;
    Ok(AccuracyRow {
        id: id.to_string(),
        folds: folds.to_vec(),
        mean,
    })
}

fn store_result(cfg: &RunConfig, r: &CvResult<f64>, stamp: &str) -> Result<()> {
    let dir = cfg.scores_dir(&r.id);
    // an interrupted write leaves no stamp, so the result is redone
    let _ = fs::remove_file(dir.join(STAMP_FILE));
    for (f, s) in r.fold_scores.iter().enumerate() {
        texfuse::io::write_atomic(&dir.join(format!("fold{f}.csv")), s.to_csv().as_bytes())?;
    }
    write_row(&dir.join(ACCURACY_FILE), &AccuracyRow::new(r.id.clone(), r.fold_accuracy.clone()))?;
    texfuse::io::write_atomic(&dir.join(STAMP_FILE), stamp.as_bytes())
}

fn is_done(cfg: &RunConfig, id: &str, folds: usize, stamp: &str) -> bool {
    let dir = cfg.scores_dir(id);
    fs::read_to_string(dir.join(STAMP_FILE)).is_ok_and(|s| s == stamp)
        && dir.join(ACCURACY_FILE).is_file()
        && (0..folds).all(|f| dir.join(format!("fold{f}.csv")).is_file())
}

pub fn train_eval(cfg: &RunConfig) -> Result<()> {
    let m = manifest(cfg)?;
    let cache = FeatureCache::new(cfg.cache_dir());
    let mut imgs: Option<Vec<Image>> = None;
    for spec in &cfg.descriptors {
        let st = stamp(cfg, &m, &format!("descriptor {}", spec.params_hash()));
        if is_done(cfg, &spec.id, m.folds, &st) {
            log::info!("{}: scores already present", spec.id);
        } else {
            if imgs.is_none() {
                imgs = Some(images(&m)?);
            }
            let r = run_descriptor_cv(&m, imgs.as_deref().expect("loaded"), spec, &cfg.svm, cfg.seed, Some(&cache))?;
            store_result(cfg, &r, &st)?;
        }
        let row = read_row(&spec.id, &cfg.scores_dir(&spec.id).join(ACCURACY_FILE))?;
        println!("{:<20} {:6.2}", spec.id, row.mean);
    }
    for ext in &cfg.external {
        let st = stamp(cfg, &m, &format!("external {}", ext.path.display()));
        if !is_done(cfg, &ext.id, m.folds, &st) {
            let shared = if is_per_fold(&ext.path) {
                None
            } else {
                Some(import_external_features::<f64>(&ext.id, &ext.path, &m)?.vectors)
            };
            let r = run_feature_cv(
                &m,
                &ext.id,
                |fold| match &shared {
                    Some(v) => Ok(v.clone()),
                    None => Ok(import_external_features::<f64>(&ext.id, &fold_path(&ext.path, fold), &m)?.vectors),
                },
                &cfg.svm,
            )?;
            store_result(cfg, &r, &st)?;
        }
        let row = read_row(&ext.id, &cfg.scores_dir(&ext.id).join(ACCURACY_FILE))?;
        println!("{:<20} {:6.2}", ext.id, row.mean);
    }
    Ok(())
}

fn load_scores(cfg: &RunConfig, m: &DatasetManifest, id: &str) -> Result<Vec<ScoreMatrix<f64>>> {
    (0..m.folds)
        .map(|f| {
            let p = cfg.scores_dir(id).join(format!("fold{f}.csv"));
            let text = fs::read_to_string(&p).map_err(|_| {
                Error::Config(format!(
                    "member {id:?} has no stored scores for fold {f}; run train-eval first"
                ))
            })?;
            let s = ScoreMatrix::from_csv(id, &text)?;
            if s.class_labels != m.class_labels {
                return Err(Error::Contract(format!("{} was scored against different classes", p.display())));
            }
            Ok(s)
        })
        .collect()
}

pub fn fuse(cfg: &RunConfig) -> Result<()> {
    let m = manifest(cfg)?;
    let mut scores = BTreeMap::new();
    let fusion_names: Vec<&String> = cfg.fusions.iter().map(|f| &f.name).collect();
    for f in &cfg.fusions {
        for id in &f.members {
            if !scores.contains_key(id) && !fusion_names.contains(&id) {
                scores.insert(id.clone(), load_scores(cfg, &m, id)?);
            }
        }
    }
    for r in run_fusion_experiment(&m, &cfg.fusions, &scores)? {
        let dir = cfg.output.join("fusions").join(&r.row.id);
        for (f, s) in r.fold_scores.iter().enumerate() {
            texfuse::io::write_atomic(&dir.join(format!("fold{f}.csv")), s.to_csv().as_bytes())?;
        }
        write_row(&cfg.fusion_file(&r.row.id), &r.row)?;
        println!("{:<20} {:6.2}", r.row.id, r.row.mean);
    }
    Ok(())
}

pub fn report(cfg: &RunConfig) -> Result<()> {
    let m = manifest(cfg)?;
    let stored = |id: &str| {
        read_row(id, &cfg.scores_dir(id).join(ACCURACY_FILE))
            .map_err(|_| Error::Config(format!("no accuracy for {id:?}; run train-eval first")))
    };
    let report = ExperimentReport {
        seed: cfg.seed,
        folds: m.folds,
        descriptors: cfg.descriptors.iter().map(|d| stored(&d.id)).collect::<Result<_>>()?,
        external: cfg.external.iter().map(|e| stored(&e.id)).collect::<Result<_>>()?,
        fusions: cfg
            .fusions
            .iter()
            .map(|f| {
                read_row(&f.name, &cfg.fusion_file(&f.name))
                    .map_err(|_| Error::Config(format!("no accuracy for fusion {:?}; run fuse first", f.name)))
            })
            .collect::<Result<_>>()?,
        config_snapshot: cfg.snapshot.clone(),
    };
    report.write(&cfg.output)?;
    print!("{}", report.tables());
    Ok(())
}

pub fn all(cfg: &RunConfig) -> Result<()> {
    extract(cfg)?;
    train_eval(cfg)?;
    fuse(cfg)?;
    report(cfg)
}
