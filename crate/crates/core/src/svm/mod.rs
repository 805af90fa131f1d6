//! Soft-margin SVMs trained by SMO, one-vs-all multiclass wrapping and
//! per-class score matrices.

mod kernel;
mod scores;
mod smo;

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use kernel::{auto_gamma, gram, Kernel, KernelChoice};
pub use scores::{accuracy, ScoreMatrix};
pub use smo::{kkt_violation, smo_solve, SmoParams, SmoSolution};

use crate::error::{dim, param, Error, Result};
use crate::scalar::Scalar;

/// Floor applied to standard deviations before dividing.
pub const STD_FLOOR: f64 = 1e-12;
const FORMAT_VERSION: u32 = 1;

/// Per-dimension `(x - mean) / std` with population statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer<T> {
    pub mean: Vec<T>,
    pub std: Vec<T>,
}

impl<T: Scalar> Standardizer<T> {
    pub fn fit(x: &[Vec<T>]) -> Result<Self> {
        let d = x.first().map(|r| r.len()).ok_or_else(|| param("cannot standardize an empty set"))?;
        if x.iter().any(|r| r.len() != d) {
            return Err(dim("feature rows have mixed dimensions"));
        }
        let n = T::from_usize_lossy(x.len());
        let floor = T::lit(STD_FLOOR);
        let mean: Vec<T> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<T>() / n).collect();
        let std = (0..d)
            .map(|j| {
                let v = x.iter().map(|r| (r[j] - mean[j]) * (r[j] - mean[j])).sum::<T>() / n;
                v.sqrt().max(floor)
            })
            .collect();
        Ok(Standardizer { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply_row(&self, r: &[T]) -> Result<Vec<T>> {
        if r.len() != self.dim() {
            return Err(dim(format!("row has {} values, standardizer expects {}", r.len(), self.dim())));
        }
        Ok(r.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(&v, (&m, &s))| (v - m) / s)
            .collect())
    }

    pub fn apply(&self, x: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
        x.iter().map(|r| self.apply_row(r)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmParams {
    pub c: f64,
    pub kernel: KernelChoice,
    pub tol: f64,
    /// SMO pair updates allowed per training sample.
    pub passes: usize,
    /// Report `1 / (1 + exp(-s))` instead of raw decision values.
    pub logistic: bool,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 10.0,
            kernel: KernelChoice::default(),
            tol: 1e-3,
            passes: 10_000,
            logistic: false,
        }
    }
}

impl SvmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(param(format!("svm.c must be positive, got {}", self.c)));
        }
        if !(self.tol > 0.0) {
            return Err(param(format!("svm.tol must be positive, got {}", self.tol)));
        }
        if let KernelChoice::Rbf { gamma: Some(g) } = self.kernel {
            if !(g > 0.0 && g.is_finite()) {
                return Err(param(format!("svm.kernel.gamma must be positive, got {g}")));
            }
        }
        Ok(())
    }

    pub fn smo(&self, n: usize) -> SmoParams {
        SmoParams {
            c: self.c,
            tol: self.tol,
            max_iter: self.passes.saturating_mul(n.max(1)),
            trace: false,
        }
    }
}

/// Binary decision function `sum_i coef_i K(sv_i, x) + bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel<T> {
    pub kernel: Kernel,
    pub c: f64,
    pub support_vectors: Vec<Vec<T>>,
    /// `alpha_i` of each support vector.
    pub alphas: Vec<T>,
    /// Label sign of each support vector.
    pub signs: Vec<i8>,
    pub bias: T,
    pub converged: bool,
}

impl<T: Scalar> SvmModel<T> {
    fn from_solution(x: &[Vec<T>], y: &[i8], sol: &SmoSolution<T>, kernel: Kernel, c: f64) -> Self {
        let mut m = SvmModel {
            kernel,
            c,
            support_vectors: Vec::new(),
            alphas: Vec::new(),
            signs: Vec::new(),
            bias: sol.bias(),
            converged: sol.converged,
        };
        for (i, &a) in sol.alpha.iter().enumerate() {
            if a > T::zero() {
                m.support_vectors.push(x[i].clone());
                m.alphas.push(a);
                m.signs.push(y[i]);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.support_vectors.first().map_or(0, |s| s.len())
    }

    pub fn decision(&self, x: &[T]) -> Result<T> {
        if !self.support_vectors.is_empty() && x.len() != self.dim() {
            return Err(dim(format!("input has {} values, model expects {}", x.len(), self.dim())));
        }
        let s: T = self
            .support_vectors
            .iter()
            .zip(self.alphas.iter().zip(&self.signs))
            .map(|(sv, (&a, &y))| a * T::lit(y as f64) * self.kernel.eval(sv, x))
            .sum();
        Ok(s + self.bias)
    }

    /// Box constraints (to 1e-8) and `sum alpha_i y_i = 0` (to 1e-6).
    pub fn check_invariants(&self) -> Result<()> {
        let c = T::lit(self.c + 1e-8);
        if let Some(a) = self.alphas.iter().find(|&&a| a < T::lit(-1e-8) || a > c) {
            return Err(Error::Contract(format!("alpha {a} outside [0, {}]", self.c)));
        }
        let s: T = self.alphas.iter().zip(&self.signs).map(|(&a, &y)| a * T::lit(y as f64)).sum();
        if s.abs() > T::lit(1e-6) {
            return Err(Error::Contract(format!("sum of alpha_i y_i is {s}")));
        }
        Ok(())
    }
}

/// Trains one binary SVM on raw (unstandardized) features.
pub fn smo_train<T: Scalar>(x: &[Vec<T>], y: &[i8], c: f64, kernel: Kernel) -> Result<SvmModel<T>> {
    if x.len() != y.len() {
        return Err(param("one label per sample is required"));
    }
    check_rows(x)?;
    let g = gram(&kernel, x);
    let params = SvmParams {
        c,
        ..SvmParams::default()
    };
    let sol = smo_solve(&g, y, &params.smo(x.len()))?;
    Ok(SvmModel::from_solution(x, y, &sol, kernel, c))
}

fn check_rows<T: Scalar>(x: &[Vec<T>]) -> Result<()> {
    let d = x.first().map_or(0, |r| r.len());
    if d == 0 {
        return Err(param("SVM training needs non-empty feature rows"));
    }
    if x.iter().any(|r| r.len() != d) {
        return Err(dim("feature rows have mixed dimensions"));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(param("SVM features must be finite"));
    }
    Ok(())
}

/// One-vs-all models over standardized features.
#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassSvmModel<T> {
    pub class_labels: Vec<String>,
    pub binary_models: Vec<SvmModel<T>>,
    pub standardizer: Standardizer<T>,
    pub logistic: bool,
}

/// `labels[i]` indexes `class_labels`. The Gram matrix is shared by every
/// binary problem; classes train in parallel.
pub fn train_multiclass<T: Scalar>(
    x: &[Vec<T>],
    labels: &[usize],
    class_labels: &[String],
    params: &SvmParams,
) -> Result<MulticlassSvmModel<T>> {
    params.validate()?;
    if x.len() != labels.len() {
        return Err(param("one label per sample is required"));
    }
    if class_labels.len() < 2 {
        return Err(param("multiclass training needs at least two classes"));
    }
    check_rows(x)?;
    let mut counts = vec![0usize; class_labels.len()];
    for &l in labels {
        *counts
            .get_mut(l)
            .ok_or_else(|| param(format!("label index {l} out of range")))? += 1;
    }
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(param(format!("class {:?} has no training samples", class_labels[c])));
    }
    let standardizer = Standardizer::fit(x)?;
    let xs = standardizer.apply(x)?;
    let kernel = params.kernel.resolve(&xs);
    let g = gram(&kernel, &xs);
    let smo = params.smo(xs.len());
    let binary_models = (0..class_labels.len())
        .into_par_iter()
        .map(|c| {
            let y: Vec<i8> = labels.iter().map(|&l| if l == c { 1 } else { -1 }).collect();
            let sol = smo_solve(&g, &y, &smo)?;
            Ok(SvmModel::from_solution(&xs, &y, &sol, kernel, params.c))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MulticlassSvmModel {
        class_labels: class_labels.to_vec(),
        binary_models,
        standardizer,
        logistic: params.logistic,
    })
}

impl<T: Scalar> MulticlassSvmModel<T> {
    /// Column `c` holds the decision value of model `c` (optionally squashed).
    pub fn score(&self, x: &[Vec<T>], sample_keys: Vec<String>, source_id: &str) -> Result<ScoreMatrix<T>> {
        if sample_keys.len() != x.len() {
            return Err(param("one key per sample is required"));
        }
        let rows = x
            .par_iter()
            .map(|r| {
                let z = self.standardizer.apply_row(r)?;
                self.binary_models
                    .iter()
                    .map(|m| {
                        let s = m.decision(&z)?;
                        Ok(if self.logistic { T::one() / (T::one() + (-s).exp()) } else { s })
                    })
                    .collect::<Result<Vec<T>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        ScoreMatrix::new(source_id, self.class_labels.clone(), sample_keys, rows.concat())
    }

    pub fn predict(&self, x: &[Vec<T>]) -> Result<Vec<usize>> {
        let keys = (0..x.len()).map(|i| i.to_string()).collect();
        Ok(self.score(x, keys, "")?.predictions())
    }

    /// Versioned line-oriented text format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let row = |s: &mut String, tag: &str, v: &[T]| {
            s.push_str(tag);
            for x in v {
                write!(s, " {x}").expect("write to string");
            }
            s.push('\n');
        };
        writeln!(s, "texfuse-svm {FORMAT_VERSION}").unwrap();
        writeln!(s, "classes {}", self.class_labels.len()).unwrap();
        for l in &self.class_labels {
            writeln!(s, "class {l}").unwrap();
        }
        writeln!(s, "logistic {}", self.logistic as u8).unwrap();
        row(&mut s, "mean", &self.standardizer.mean);
        row(&mut s, "std", &self.standardizer.std);
        for m in &self.binary_models {
            let kernel = match m.kernel {
                Kernel::Linear => "linear".to_string(),
                Kernel::Rbf { gamma } => format!("rbf {gamma}"),
            };
            writeln!(
                s,
                "model {} {} {} {} {}",
                m.support_vectors.len(),
                m.c,
                m.bias,
                m.converged as u8,
                kernel
            )
            .unwrap();
            for ((sv, a), y) in m.support_vectors.iter().zip(&m.alphas).zip(&m.signs) {
                write!(s, "sv {y} {a}").unwrap();
                for v in sv {
                    write!(s, " {v}").unwrap();
                }
                s.push('\n');
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: String| Error::Parse {
            what: "svm model".into(),
            message: m,
        };
        let num = |t: &str| t.parse::<T>().map_err(|_| bad(format!("bad number {t:?}")));
        let mut lines = text.lines().filter(|l| !l.is_empty()).peekable();
        let mut next = |want: &str| -> Result<Vec<String>> {
            let line = lines.next().ok_or_else(|| bad(format!("missing `{want}` line")))?;
            let (tag, rest) = line.split_once(' ').unwrap_or((line, ""));
            if tag != want {
                return Err(bad(format!("expected `{want}`, found {line:?}")));
            }
            Ok(if want == "class" {
                vec![rest.to_string()]
            } else {
                rest.split(' ').filter(|t| !t.is_empty()).map(str::to_string).collect()
            })
        };
        let version = next("texfuse-svm")?;
        if version.first().map(String::as_str) != Some("1") {
            return Err(bad(format!("unsupported version {version:?}")));
        }
        let n_classes: usize = next("classes")?
            .first()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad("bad class count".into()))?;
        let mut class_labels = Vec::with_capacity(n_classes);
        for _ in 0..n_classes {
            class_labels.push(next("class")?.remove(0));
        }
        let logistic = next("logistic")?.first().map(String::as_str) == Some("1");
        let mean = next("mean")?.iter().map(|t| num(t)).collect::<Result<Vec<T>>>()?;
        let std = next("std")?.iter().map(|t| num(t)).collect::<Result<Vec<T>>>()?;
        let mut binary_models = Vec::with_capacity(n_classes);
        for _ in 0..n_classes {
            let h = next("model")?;
            if h.len() < 5 {
                return Err(bad("short model header".into()));
            }
            let n_sv: usize = h[0].parse().map_err(|_| bad("bad SV count".into()))?;
            let c: f64 = h[1].parse().map_err(|_| bad("bad C".into()))?;
            let bias = num(&h[2])?;
            let converged = h[3] == "1";
            let kernel = match (h[4].as_str(), h.get(5)) {
                ("linear", _) => Kernel::Linear,
                ("rbf", Some(g)) => Kernel::Rbf {
                    gamma: g.parse().map_err(|_| bad("bad gamma".into()))?,
                },
                _ => return Err(bad(format!("unknown kernel {:?}", h[4]))),
            };
            let mut m = SvmModel {
                kernel,
                c,
                support_vectors: Vec::with_capacity(n_sv),
                alphas: Vec::with_capacity(n_sv),
                signs: Vec::with_capacity(n_sv),
                bias,
                converged,
            };
            for _ in 0..n_sv {
                let t = next("sv")?;
                if t.len() != mean.len() + 2 {
                    return Err(bad("support vector has the wrong length".into()));
                }
                m.signs.push(t[0].parse().map_err(|_| bad("bad sign".into()))?);
                m.alphas.push(num(&t[1])?);
                m.support_vectors.push(t[2..].iter().map(|v| num(v)).collect::<Result<_>>()?);
            }
            binary_models.push(m);
        }
        if mean.len() != std.len() {
            return Err(bad("standardizer mean and std lengths differ".into()));
        }
        Ok(MulticlassSvmModel {
            class_labels,
            binary_models,
            standardizer: Standardizer { mean, std },
            logistic,
        })
    }
}
