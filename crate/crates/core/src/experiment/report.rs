use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::ensemble::{fuse, FusionConfig};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::svm::{accuracy, ScoreMatrix};

use super::cv::mean;
use super::DatasetManifest;

const HEADER: &str = "texfuse-report 1";
pub const RESULTS_FILE: &str = "results.txt";
pub const TABLES_FILE: &str = "tables.txt";

/// Per-fold and mean accuracy (percent) of one classifier or fusion.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyRow {
    pub id: String,
    pub folds: Vec<f64>,
    pub mean: f64,
}

impl AccuracyRow {
    pub fn new(id: impl Into<String>, folds: Vec<f64>) -> Self {
        AccuracyRow {
            id: id.into(),
            mean: mean(&folds),
            folds,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentReport {
    pub seed: u64,
    pub folds: usize,
    /// Stand-alone handcrafted descriptors.
    pub descriptors: Vec<AccuracyRow>,
    /// Stand-alone SVMs on imported features.
    pub external: Vec<AccuracyRow>,
    pub fusions: Vec<AccuracyRow>,
    /// The configuration the run used, verbatim.
    pub config_snapshot: String,
}

/// Outcome of one fusion configuration.
#[derive(Debug, Clone)]
pub struct FusionResult<T> {
    pub row: AccuracyRow,
    /// Fused test-split scores per fold.
    pub fold_scores: Vec<ScoreMatrix<T>>,
}

/// Fold-wise sum-rule fusion of stored test-split scores.
/// `scores[id][fold]` holds member `id`'s scores on fold `fold`. Fusions run
/// in order and a member may name an earlier fusion, whose fused scores then
/// take part like any classifier's.
pub fn run_fusion_experiment<T: Scalar>(
    manifest: &DatasetManifest,
    fusions: &[FusionConfig],
    scores: &BTreeMap<String, Vec<ScoreMatrix<T>>>,
) -> Result<Vec<FusionResult<T>>> {
    let labels = manifest.labels();
    let mut fused_so_far: BTreeMap<String, Vec<ScoreMatrix<T>>> = BTreeMap::new();
    let mut out = Vec::with_capacity(fusions.len());
    for cfg in fusions {
        cfg.validate()?;
        let lookup = |m: &str| fused_so_far.get(m).or_else(|| scores.get(m));
        for m in &cfg.members {
            match lookup(m) {
                Some(v) if v.len() == manifest.folds => {}
                Some(v) => {
                    return Err(Error::Config(format!(
                        "fusion {:?}: member {m:?} has scores for {} of {} folds",
                        cfg.name,
                        v.len(),
                        manifest.folds
                    )))
                }
                None => {
                    return Err(Error::Config(format!(
                        "fusion {:?}: member {m:?} has no scores",
                        cfg.name
                    )))
                }
            }
        }
        let mut accs = Vec::with_capacity(manifest.folds);
        let mut fold_scores = Vec::with_capacity(manifest.folds);
        for fold in 0..manifest.folds {
            let (_, test) = manifest.split(fold);
            let members: BTreeMap<String, ScoreMatrix<T>> = cfg
                .members
                .iter()
                .map(|m| (m.clone(), lookup(m).expect("checked")[fold].clone()))
                .collect();
            let fused = fuse(cfg, &members)?;
            let keys = test.iter().map(|&i| manifest.entries[i].path.as_str());
            if fused.fused.sample_keys.iter().map(String::as_str).ne(keys) {
                return Err(Error::Contract(format!(
                    "fusion {:?} fold {fold}: scores are not aligned with the test split",
                    cfg.name
                )));
            }
            let truth: Vec<usize> = test.iter().map(|&i| labels[i]).collect();
            accs.push(accuracy(&fused.predicted, &truth));
            fold_scores.push(fused.fused);
        }
        fused_so_far.insert(cfg.name.clone(), fold_scores.clone());
        out.push(FusionResult {
            row: AccuracyRow::new(cfg.name.clone(), accs),
            fold_scores,
        });
    }
    Ok(out)
}

fn write_rows(s: &mut String, tag: &str, rows: &[AccuracyRow]) {
    for r in rows {
        write!(s, "{tag} {} {}", r.id, r.mean).unwrap();
        for f in &r.folds {
            write!(s, " {f}").unwrap();
        }
        s.push('\n');
    }
}

impl ExperimentReport {
    /// Machine-readable result file. Numbers use shortest round-trip form, so
    /// [`ExperimentReport::parse`] recovers them exactly.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{HEADER}").unwrap();
        writeln!(s, "seed {}", self.seed).unwrap();
        writeln!(s, "folds {}", self.folds).unwrap();
        write_rows(&mut s, "descriptor", &self.descriptors);
        write_rows(&mut s, "external", &self.external);
        write_rows(&mut s, "fusion", &self.fusions);
        for line in self.config_snapshot.lines() {
            writeln!(s, "config {line}").unwrap();
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |m: String| Error::Parse {
            what: "report".into(),
            message: m,
        };
        let mut lines = text.lines();
        if lines.next() != Some(HEADER) {
            return Err(bad(format!("first line must be `{HEADER}`")));
        }
        let mut r = ExperimentReport::default();
        let mut snapshot = Vec::new();
        for (n, line) in lines.enumerate() {
            let (tag, rest) = line.split_once(' ').unwrap_or((line, ""));
            let at = |m: &str| bad(format!("line {}: {m}", n + 2));
            match tag {
                "seed" => r.seed = rest.parse().map_err(|_| at("bad seed"))?,
                "folds" => r.folds = rest.parse().map_err(|_| at("bad fold count"))?,
                "descriptor" | "external" | "fusion" => {
                    let mut parts = rest.split(' ');
                    let id = parts.next().filter(|s| !s.is_empty()).ok_or_else(|| at("missing id"))?;
                    let nums = parts
                        .map(|p| p.parse::<f64>().map_err(|_| at("bad number")))
                        .collect::<Result<Vec<_>>>()?;
                    let (&mean, folds) = nums.split_first().ok_or_else(|| at("missing mean"))?;
                    let row = AccuracyRow {
                        id: id.to_string(),
                        folds: folds.to_vec(),
                        mean,
                    };
                    match tag {
                        "descriptor" => r.descriptors.push(row),
                        "external" => r.external.push(row),
                        _ => r.fusions.push(row),
                    }
                }
                "config" => snapshot.push(rest),
                "" if rest.is_empty() => {}
                _ => return Err(at(&format!("unknown tag {tag:?}"))),
            }
        }
        r.config_snapshot = snapshot.join("\n");
        if !r.config_snapshot.is_empty() {
            r.config_snapshot.push('\n');
        }
        Ok(r)
    }

    /// Plain-text tables: stand-alone descriptors in one, ensembles and
    /// external classifiers in the other; one column per entry.
    pub fn tables(&self) -> String {
        let mut s = String::new();
        let table = |s: &mut String, title: &str, rows: &[&AccuracyRow]| {
            writeln!(s, "{title}").unwrap();
            let cells: Vec<(String, String)> = rows.iter().map(|r| (r.id.clone(), format!("{:.2}", r.mean))).collect();
            let widths: Vec<usize> = cells.iter().map(|(a, b)| a.len().max(b.len())).collect();
            let line = |s: &mut String, pick: &dyn Fn(&(String, String)) -> &str| {
                let row: Vec<String> = cells.iter().zip(&widths).map(|(c, &w)| format!("{:>w$}", pick(c))).collect();
                writeln!(s, "{}", row.join("  ")).unwrap();
            };
            line(s, &|c| c.0.as_str());
            line(s, &|c| c.1.as_str());
            s.push('\n');
        };
        table(
            &mut s,
            "Accuracy of the texture descriptors (%)",
            &self.descriptors.iter().collect::<Vec<_>>(),
        );
        let ens: Vec<&AccuracyRow> = self.fusions.iter().chain(&self.external).collect();
        if !ens.is_empty() {
            table(&mut s, "Performance of the ensembles (%)", &ens);
        }
        writeln!(s, "seed {}, {} folds", self.seed, self.folds).unwrap();
        s
    }

    /// Writes the result file and the tables into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        crate::io::write_atomic(&dir.join(RESULTS_FILE), self.to_text().as_bytes())?;
        crate::io::write_atomic(&dir.join(TABLES_FILE), self.tables().as_bytes())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(dir.join(RESULTS_FILE))?)
    }
}
