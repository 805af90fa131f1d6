//! Score-level fusion: z-score normalization and the sum rule.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{argmax, Scalar};
use crate::svm::{ScoreMatrix, STD_FLOOR};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    None,
    /// Mean and std pooled over every entry of the matrix.
    Zscore,
    /// Mean and std per class column.
    ZscoreColumns,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionConfig {
    pub name: String,
    pub members: Vec<String>,
    #[serde(default)]
    pub normalization: Normalization,
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.members.is_empty() {
            return Err(Error::Config(format!("fusion {:?} has no members", self.name)));
        }
        let mut seen = HashSet::new();
        for m in &self.members {
            if !seen.insert(m) {
                return Err(Error::Config(format!("fusion {:?} lists member {m:?} twice", self.name)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedPrediction<T> {
    /// Argmax of each fused row; lowest class index on ties.
    pub predicted: Vec<usize>,
    pub fused: ScoreMatrix<T>,
}

fn zscore<T: Scalar>(values: &[T]) -> Vec<T> {
    if values.is_empty() || values.iter().all(|&v| v == values[0]) {
        return vec![T::zero(); values.len()];
    }
    let n = T::from_usize_lossy(values.len());
    let mean = values.iter().copied().sum::<T>() / n;
    let var = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
    let std = var.sqrt().max(T::lit(STD_FLOOR));
    values.iter().map(|&v| (v - mean) / std).collect()
}

/// Pooled z-score: every entry shifted by the matrix mean and divided by the
/// matrix (population) standard deviation. A constant matrix maps to zeros.
pub fn znorm<T: Scalar>(m: &ScoreMatrix<T>) -> Result<ScoreMatrix<T>> {
    m.with_scores(zscore(m.scores()))
}

/// Column-wise z-score.
pub fn znorm_columns<T: Scalar>(m: &ScoreMatrix<T>) -> Result<ScoreMatrix<T>> {
    let (n, k) = (m.n_samples(), m.n_classes());
    let mut out = vec![T::zero(); n * k];
    for c in 0..k {
        let col: Vec<T> = (0..n).map(|i| m.get(i, c)).collect();
        for (i, v) in zscore(&col).into_iter().enumerate() {
            out[i * k + c] = v;
        }
    }
    m.with_scores(out)
}

pub fn normalize<T: Scalar>(m: &ScoreMatrix<T>, how: Normalization) -> Result<ScoreMatrix<T>> {
    match how {
        Normalization::None => Ok(m.clone()),
        Normalization::Zscore => znorm(m),
        Normalization::ZscoreColumns => znorm_columns(m),
    }
}

/// Elementwise sum of aligned matrices and the per-row argmax.
///
/// Each cell sums its member values in sorted order, so the result does not
/// depend on the order of `members` at all.
pub fn sum_rule<T: Scalar>(members: &[&ScoreMatrix<T>]) -> Result<FusedPrediction<T>> {
    let first = *members
        .first()
        .ok_or_else(|| Error::Contract("the sum rule needs at least one member".into()))?;
    for m in &members[1..] {
        if m.class_labels != first.class_labels {
            return Err(Error::Contract(format!(
                "{:?} and {:?} disagree on class labels",
                first.source_id, m.source_id
            )));
        }
        if m.sample_keys != first.sample_keys {
            return Err(Error::Contract(format!(
                "{:?} and {:?} disagree on sample order",
                first.source_id, m.source_id
            )));
        }
    }
    let mut cell = Vec::with_capacity(members.len());
    let fused: Vec<T> = (0..first.scores().len())
        .map(|idx| {
            cell.clear();
            cell.extend(members.iter().map(|m| m.scores()[idx]));
            cell.sort_by(|a, b| a.as_f64().total_cmp(&b.as_f64()));
            cell.iter().copied().sum()
        })
        .collect();
    let id = members.iter().map(|m| m.source_id.as_str()).collect::<Vec<_>>().join("+");
    let fused = first.with_scores(fused)?;
    let fused = ScoreMatrix::new(id, fused.class_labels.clone(), fused.sample_keys.clone(), fused.scores().to_vec())?;
    let predicted = (0..fused.n_samples())
        .map(|i| argmax(fused.row(i)).expect("non-empty row"))
        .collect();
    Ok(FusedPrediction { predicted, fused })
}

/// Normalizes each member as configured, then applies the sum rule.
pub fn fuse<T: Scalar>(config: &FusionConfig, scores: &BTreeMap<String, ScoreMatrix<T>>) -> Result<FusedPrediction<T>> {
    config.validate()?;
    let normalized = config
        .members
        .iter()
        .map(|id| {
            let m = scores
                .get(id)
                .ok_or_else(|| Error::Config(format!("fusion {:?}: member {id:?} has no scores", config.name)))?;
            normalize(m, config.normalization)
        })
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&ScoreMatrix<T>> = normalized.iter().collect();
    let mut out = sum_rule(&refs)?;
    out.fused.source_id = config.name.clone();
    Ok(out)
}
