use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::scalar::{argmax, Scalar};

/// Per-sample, per-class scores from one classifier. Rows follow
/// `sample_keys`, columns follow `class_labels`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix<T> {
    pub source_id: String,
    pub class_labels: Vec<String>,
    pub sample_keys: Vec<String>,
    scores: Vec<T>,
}

impl<T: Scalar> ScoreMatrix<T> {
    pub fn new(
        source_id: impl Into<String>,
        class_labels: Vec<String>,
        sample_keys: Vec<String>,
        scores: Vec<T>,
    ) -> Result<Self> {
        if class_labels.is_empty() {
            return Err(Error::Contract("a score matrix needs at least one class".into()));
        }
        if scores.len() != sample_keys.len() * class_labels.len() {
            return Err(Error::Contract(format!(
                "{} scores for {} samples x {} classes",
                scores.len(),
                sample_keys.len(),
                class_labels.len()
            )));
        }
        if scores.iter().any(|v| !v.is_finite()) {
            return Err(Error::Contract("score matrix entries must be finite".into()));
        }
        Ok(ScoreMatrix {
            source_id: source_id.into(),
            class_labels,
            sample_keys,
            scores,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.sample_keys.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_labels.len()
    }

    pub fn scores(&self) -> &[T] {
        &self.scores
    }

    pub fn row(&self, i: usize) -> &[T] {
        let k = self.n_classes();
        &self.scores[i * k..(i + 1) * k]
    }

    pub fn get(&self, i: usize, c: usize) -> T {
        self.scores[i * self.n_classes() + c]
    }

    /// Same shape and metadata, new entries.
    pub fn with_scores(&self, scores: Vec<T>) -> Result<Self> {
        ScoreMatrix::new(
            self.source_id.clone(),
            self.class_labels.clone(),
            self.sample_keys.clone(),
            scores,
        )
    }

    /// Column index of the largest score per row; lowest index on ties.
    pub fn predictions(&self) -> Vec<usize> {
        (0..self.n_samples())
            .map(|i| argmax(self.row(i)).expect("non-empty row"))
            .collect()
    }

    /// Rows stacked in order; every part must share the class labels.
    pub fn vstack(source_id: impl Into<String>, parts: &[ScoreMatrix<T>]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::Contract("nothing to stack".into()))?;
        let mut keys = Vec::new();
        let mut scores = Vec::new();
        for p in parts {
            if p.class_labels != first.class_labels {
                return Err(Error::Contract("stacked score matrices disagree on class labels".into()));
            }
            keys.extend(p.sample_keys.iter().cloned());
            scores.extend_from_slice(&p.scores);
        }
        ScoreMatrix::new(source_id, first.class_labels.clone(), keys, scores)
    }

    /// Header `path,<class>,...` then one row per sample.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("path");
        for l in &self.class_labels {
            s.push(',');
            s.push_str(l);
        }
        s.push('\n');
        for (i, key) in self.sample_keys.iter().enumerate() {
            s.push_str(key);
            for v in self.row(i) {
                write!(s, ",{v}").expect("write to string");
            }
            s.push('\n');
        }
        s
    }

    pub fn from_csv(source_id: impl Into<String>, text: &str) -> Result<Self> {
        let bad = |m: String| Error::Parse {
            what: "score matrix".into(),
            message: m,
        };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
        let mut cols = header.split(',');
        if cols.next() != Some("path") {
            return Err(bad("header must start with `path`".into()));
        }
        let labels: Vec<String> = cols.map(str::to_string).collect();
        let mut keys = Vec::new();
        let mut scores = Vec::new();
        for (ln, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
            let mut f = line.split(',');
            keys.push(f.next().unwrap_or_default().to_string());
            let row: Vec<T> = f
                .map(|v| v.parse::<T>().map_err(|_| bad(format!("line {}: bad number {v:?}", ln + 2))))
                .collect::<Result<_>>()?;
            if row.len() != labels.len() {
                return Err(bad(format!("line {}: {} values, expected {}", ln + 2, row.len(), labels.len())));
            }
            scores.extend(row);
        }
        ScoreMatrix::new(source_id, labels, keys, scores)
    }
}

/// Percentage of `predicted` equal to `truth`.
pub fn accuracy(predicted: &[usize], truth: &[usize]) -> f64 {
    assert_eq!(predicted.len(), truth.len(), "prediction and truth lengths differ");
    if truth.is_empty() {
        return 0.0;
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    100.0 * hits as f64 / truth.len() as f64
}
