use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Kernel as configured; `gamma: None` picks `1 / (dim * mean variance)` of
/// the (standardized) training features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelChoice {
    Linear,
    Rbf {
        #[serde(default)]
        gamma: Option<f64>,
    },
}

impl Default for KernelChoice {
    fn default() -> Self {
        KernelChoice::Rbf { gamma: None }
    }
}

impl KernelChoice {
    pub fn resolve<T: Scalar>(&self, x: &[Vec<T>]) -> Kernel {
        match *self {
            KernelChoice::Linear => Kernel::Linear,
            KernelChoice::Rbf { gamma: Some(g) } => Kernel::Rbf { gamma: g },
            KernelChoice::Rbf { gamma: None } => Kernel::Rbf {
                gamma: auto_gamma(x),
            },
        }
    }
}

/// `1 / (dim * meanVar)`, falling back to `1 / dim` for constant data.
pub fn auto_gamma<T: Scalar>(x: &[Vec<T>]) -> f64 {
    let dim = x.first().map_or(1, |r| r.len()).max(1);
    let n = x.len().max(1) as f64;
    let mut total = 0.0;
    for j in 0..dim {
        let mean = x.iter().map(|r| r[j].as_f64()).sum::<f64>() / n;
        total += x.iter().map(|r| (r[j].as_f64() - mean).powi(2)).sum::<f64>() / n;
    }
    let mean_var = total / dim as f64;
    if mean_var > 0.0 {
        1.0 / (dim as f64 * mean_var)
    } else {
        1.0 / dim as f64
    }
}

/// A fully specified kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
}

impl Kernel {
    #[inline]
    pub fn eval<T: Scalar>(&self, a: &[T], b: &[T]) -> T {
        match *self {
            Kernel::Linear => a.iter().zip(b).map(|(&u, &v)| u * v).sum(),
            Kernel::Rbf { gamma } => {
                let d: T = a.iter().zip(b).map(|(&u, &v)| (u - v) * (u - v)).sum();
                (-T::lit(gamma) * d).exp()
            }
        }
    }
}

/// Full symmetric Gram matrix, row-major.
pub fn gram<T: Scalar>(kernel: &Kernel, x: &[Vec<T>]) -> Vec<T> {
    use rayon::prelude::*;
    let n = x.len();
    let mut g = vec![T::zero(); n * n];
    g.par_chunks_mut(n.max(1)).enumerate().for_each(|(i, row)| {
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = kernel.eval(&x[i], &x[j]);
        }
    });
    // evaluate once per pair so the matrix is exactly symmetric
    for i in 0..n {
        for j in 0..i {
            g[i * n + j] = g[j * n + i];
        }
    }
    g
}
