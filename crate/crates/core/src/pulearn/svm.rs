//! Soft-margin linear SVM trained in the dual with SMO.
//!
//! Minimizes `½‖w‖² + C Σ max(0, 1 − yᵢ(w·xᵢ + b))` with an unregularized
//! bias. Working pairs are chosen by the second-order rule of Fan, Chen and
//! Lin; the weight vector is kept explicitly so each step costs O(n·d).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    pub c: f64,
    /// Stop once the maximal KKT violation falls below this.
    pub tol: f64,
    /// Iteration budget in units of `n` pair updates.
    pub max_epochs: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            tol: 1e-4,
            max_epochs: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Maximal KKT violation at exit.
    pub kkt_gap: f64,
    /// Primal objective at exit.
    pub objective: f64,
}

impl LinearSvm {
    pub fn decision(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }

    pub fn decisions(&self, features: &DMatrix<f64>) -> Vec<f64> {
        rows(features).iter().map(|r| self.decision(r)).collect()
    }

    /// 1 for treated (positive decision), 0 for control.
    pub fn predict(&self, x: &[f64]) -> u8 {
        u8::from(self.decision(x) > 0.0)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// `½‖w‖² + C Σ hinge` for labels in {0, 1}.
pub fn primal_objective(weights: &[f64], bias: f64, c: f64, features: &DMatrix<f64>, labels: &[u8]) -> f64 {
    let reg = 0.5 * dot(weights, weights);
    let hinge: f64 = rows(features)
        .iter()
        .zip(labels)
        .map(|(x, &l)| {
            let y = if l == 1 { 1.0 } else { -1.0 };
            (1.0 - y * (dot(weights, x) + bias)).max(0.0)
        })
        .sum();
    reg + c * hinge
}

const TAU: f64 = 1e-12;

pub fn fit_linear_svm(features: &DMatrix<f64>, labels: &[u8], cfg: &SvmConfig) -> Result<LinearSvm> {
    assert_eq!(features.nrows(), labels.len(), "features and labels must align");
    if !(cfg.c > 0.0) {
        return Err(Error::Config(format!("SVM needs C > 0, got {}", cfg.c)));
    }
    if !labels.contains(&0) || !labels.contains(&1) {
        return Err(Error::Training("SVM needs both classes".into()));
    }
    let x = rows(features);
    let n = x.len();
    let d = features.ncols();
    let y: Vec<f64> = labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let kdiag: Vec<f64> = x.iter().map(|r| dot(r, r)).collect();
    let c = cfg.c;

    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; d];
    let mut grad = vec![-1.0; n];
    let mut k_i = vec![0.0; n];
    let max_iter = cfg.max_epochs.saturating_mul(n).max(1);
    let mut iterations = 0;
    let mut gap = f64::INFINITY;

    let in_up = |a: f64, y: f64| (y > 0.0 && a < c) || (y < 0.0 && a > 0.0);
    let in_low = |a: f64, y: f64| (y > 0.0 && a > 0.0) || (y < 0.0 && a < c);

    while iterations < max_iter {
        for t in 0..n {
            grad[t] = y[t] * dot(&w, &x[t]) - 1.0;
        }
        // first index: maximal violation from the "up" set
        let mut g_max = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            if in_up(alpha[t], y[t]) && -y[t] * grad[t] > g_max {
                g_max = -y[t] * grad[t];
                i = t;
            }
        }
        let mut g_min = f64::INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        if i != usize::MAX {
            for t in 0..n {
                k_i[t] = dot(&x[i], &x[t]);
            }
        }
        for t in 0..n {
            if !in_low(alpha[t], y[t]) {
                continue;
            }
            let v = -y[t] * grad[t];
            g_min = g_min.min(v);
            if i == usize::MAX {
                continue;
            }
            let b = g_max - v;
            if b > 0.0 {
                let mut a = kdiag[i] + kdiag[t] - 2.0 * k_i[t];
                if a <= 0.0 {
                    a = TAU;
                }
                let score = -(b * b) / a;
                if score < best {
                    best = score;
                    j = t;
                }
            }
        }
        gap = g_max - g_min;
        if gap < cfg.tol || j == usize::MAX {
            break;
        }
        iterations += 1;

        let (ai, aj) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let mut quad = kdiag[i] + kdiag[j] - 2.0 * k_i[j];
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = kdiag[i] + kdiag[j] - 2.0 * k_i[j];
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = ((alpha[i] - ai) * y[i], (alpha[j] - aj) * y[j]);
        for k in 0..d {
            w[k] += di * x[i][k] + dj * x[j][k];
        }
    }
    for t in 0..n {
        grad[t] = y[t] * dot(&w, &x[t]) - 1.0;
    }
    let bias = -rho(&alpha, &y, &grad, c);
    let objective = primal_objective(&w, bias, c, features, labels);
    Ok(LinearSvm {
        weights: w,
        bias,
        c,
        iterations,
        converged: gap < cfg.tol,
        kkt_gap: gap,
        objective,
    })
}

/// Offset from free support vectors, or the midpoint of the feasible interval
/// when none is free.
fn rho(alpha: &[f64], y: &[f64], grad: &[f64], c: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum, mut free) = (0.0, 0usize);
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            sum += yg;
            free += 1;
        }
    }
    if free > 0 {
        sum / free as f64
    } else {
        (ub + lb) / 2.0
    }
}
