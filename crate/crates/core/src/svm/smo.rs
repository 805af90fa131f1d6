//! Sequential minimal optimization for the soft-margin dual
//!
//! `min 1/2 a'Qa - e'a  s.t.  0 <= a_i <= C, y'a = 0`, `Q_ij = y_i y_j K_ij`,
//!
//! with maximal-violating-pair working-set selection.

use crate::error::{param, Result};
use crate::scalar::Scalar;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SmoParams {
    pub c: f64,
    /// Stop when the maximal KKT violation drops below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Record the dual objective after every update.
    pub trace: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution<T> {
    pub alpha: Vec<T>,
    /// Decision function is `sum_i alpha_i y_i K(x_i, x) - rho`.
    pub rho: T,
    pub iterations: usize,
    pub converged: bool,
    /// Dual objective `e'a - 1/2 a'Qa` after each accepted pair update.
    pub objective_trace: Vec<T>,
}

impl<T: Scalar> SmoSolution<T> {
    pub fn bias(&self) -> T {
        -self.rho
    }
}

/// Solves the dual over a precomputed row-major Gram matrix.
pub fn smo_solve<T: Scalar>(gram: &[T], y: &[i8], p: &SmoParams) -> Result<SmoSolution<T>> {
    let n = y.len();
    if gram.len() != n * n {
        return Err(param(format!("Gram matrix has {} entries for {n} samples", gram.len())));
    }
    if y.iter().any(|&v| v != 1 && v != -1) {
        return Err(param("labels must be +1 or -1"));
    }
    if !y.contains(&1) || !y.contains(&-1) {
        return Err(param("SVM training needs at least one sample of each sign"));
    }
    if !(p.c > 0.0) {
        return Err(param(format!("C must be positive, got {}", p.c)));
    }
    let c = T::lit(p.c);
    let tol = T::lit(p.tol);
    let tau = T::lit(TAU);
    let yf: Vec<T> = y.iter().map(|&v| T::lit(v as f64)).collect();
    let k = |i: usize, j: usize| gram[i * n + j];
    let qd: Vec<T> = (0..n).map(|i| k(i, i)).collect();

    let mut alpha = vec![T::zero(); n];
    let mut grad = vec![-T::one(); n];
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    let up = |a: T, yi: i8| if yi > 0 { a < c } else { a > T::zero() };
    let low = |a: T, yi: i8| if yi > 0 { a > T::zero() } else { a < c };

    while iterations < p.max_iter {
        let mut i = usize::MAX;
        let mut gmax = T::neg_infinity();
        let mut j = usize::MAX;
        let mut gmin = T::infinity();
        for t in 0..n {
            let v = -yf[t] * grad[t];
            if up(alpha[t], y[t]) && v > gmax {
                gmax = v;
                i = t;
            }
            if low(alpha[t], y[t]) && v < gmin {
                gmin = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin < tol {
            converged = true;
            break;
        }
        iterations += 1;

        let (ci, cj) = (c, c);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let qij = yf[i] * yf[j] * k(i, j);
        if y[i] != y[j] {
            let mut quad = qd[i] + qd[j] + T::lit(2.0) * qij;
            if quad <= T::zero() {
                quad = tau;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > T::zero() {
                if alpha[j] < T::zero() {
                    alpha[j] = T::zero();
                    alpha[i] = diff;
                }
            } else if alpha[i] < T::zero() {
                alpha[i] = T::zero();
                alpha[j] = -diff;
            }
            if diff > ci - cj {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = ci - diff;
                }
            } else if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = cj + diff;
            }
        } else {
            let mut quad = qd[i] + qd[j] - T::lit(2.0) * qij;
            if quad <= T::zero() {
                quad = tau;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > ci {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = sum - ci;
                }
            } else if alpha[j] < T::zero() {
                alpha[j] = T::zero();
                alpha[i] = sum;
            }
            if sum > cj {
                if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = sum - cj;
                }
            } else if alpha[i] < T::zero() {
                alpha[i] = T::zero();
                alpha[j] = sum;
            }
        }

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += yf[t] * (yf[i] * k(t, i) * di + yf[j] * k(t, j) * dj);
        }
        if p.trace {
            // e'a - 1/2 a'Qa = -1/2 sum a_t (G_t - 1)
            let f: T = alpha.iter().zip(&grad).map(|(&a, &g)| a * (g - T::one())).sum();
            trace.push(-f / T::lit(2.0));
        }
    }
    if !converged {
        log::warn!("SMO stopped at the iteration cap ({}) before reaching tolerance {}", p.max_iter, p.tol);
    }

    // rho from free vectors, or the midpoint of the feasible interval
    let (mut ub, mut lb) = (T::infinity(), T::neg_infinity());
    let (mut sum_free, mut n_free) = (T::zero(), 0usize);
    for t in 0..n {
        let yg = yf[t] * grad[t];
        let at_upper = alpha[t] >= c;
        let at_lower = alpha[t] <= T::zero();
        if at_upper {
            if y[t] < 0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower {
            if y[t] > 0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / T::from_usize_lossy(n_free)
    } else {
        (ub + lb) / T::lit(2.0)
    };

    Ok(SmoSolution {
        alpha,
        rho,
        iterations,
        converged,
        objective_trace: trace,
    })
}

/// Largest violation of the KKT conditions
/// `a=0 => yf >= 1`, `0<a<C => yf = 1`, `a=C => yf <= 1`, where `f` is the
/// decision value on each training point.
pub fn kkt_violation<T: Scalar>(gram: &[T], y: &[i8], sol: &SmoSolution<T>, c: f64) -> T {
    let n = y.len();
    let c = T::lit(c);
    let eps = T::lit(1e-8);
    let mut worst = T::zero();
    for t in 0..n {
        let f: T = (0..n)
            .map(|s| sol.alpha[s] * T::lit(y[s] as f64) * gram[s * n + t])
            .sum::<T>()
            - sol.rho;
        let m = T::lit(y[t] as f64) * f;
        let a = sol.alpha[t];
        let v = if a <= eps {
            (T::one() - m).max(T::zero())
        } else if a >= c - eps {
            (m - T::one()).max(T::zero())
        } else {
            (m - T::one()).abs()
        };
        worst = worst.max(v);
    }
    worst
}
