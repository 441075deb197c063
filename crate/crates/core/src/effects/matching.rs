use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{bootstrap_replicates, group_sizes, percentile_interval, two_sided_p_value, AteEstimate, BootstrapConfig, Method};
use crate::error::Result;

/// Smallest acceptable Cholesky pivot relative to the column variance.
const SINGULAR_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchingMetric {
    Mahalanobis,
    /// Per-column standardized Euclidean, used when the covariance is singular.
    Diagonal,
}

/// Maps `z` to coordinates where Euclidean distance is the Mahalanobis
/// distance under the sample covariance of all rows.
fn whiten(z: &DMatrix<f64>) -> (DMatrix<f64>, MatchingMetric) {
    let (n, p) = z.shape();
    if p == 0 {
        return (z.clone(), MatchingMetric::Mahalanobis);
    }
    let means: Vec<f64> = (0..p).map(|j| z.column(j).mean()).collect();
    let centered = DMatrix::from_fn(n, p, |i, j| z[(i, j)] - means[j]);
    let cov = centered.transpose() * &centered / (n.max(2) - 1) as f64;
    if let Some(ch) = cov.clone().cholesky() {
        let l = ch.l();
        if (0..p).all(|j| l[(j, j)] * l[(j, j)] > SINGULAR_TOL * cov[(j, j)].max(f64::MIN_POSITIVE)) {
            if let Some(w) = l.solve_lower_triangular(&centered.transpose()) {
                return (w.transpose(), MatchingMetric::Mahalanobis);
            }
        }
    }
    let sd: Vec<f64> = (0..p)
        .map(|j| {
            let s = cov[(j, j)].sqrt();
            if s > 0.0 { s } else { 1.0 }
        })
        .collect();
    (DMatrix::from_fn(n, p, |i, j| centered[(i, j)] / sd[j]), MatchingMetric::Diagonal)
}

fn sq_dist(w: &DMatrix<f64>, a: usize, b: usize) -> f64 {
    (0..w.ncols()).map(|j| (w[(a, j)] - w[(b, j)]).powi(2)).sum()
}

/// Mean outcome of the k nearest `pool` members to unit `i`, ties going to the
/// earlier pool position.
fn neighbor_mean(w: &DMatrix<f64>, y: &[f64], i: usize, pool: &[usize], k: usize) -> f64 {
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
    for (pos, &j) in pool.iter().enumerate() {
        let d = sq_dist(w, i, j);
        if best.len() == k && d >= best[k - 1].0 {
            continue;
        }
        let at = best.partition_point(|&(bd, _)| bd <= d);
        best.insert(at, (d, pos));
        best.truncate(k);
    }
    best.iter().map(|&(_, pos)| y[pool[pos]]).sum::<f64>() / best.len() as f64
}

/// Bidirectional k-NN matching estimate over the units in `idx` (which may
/// repeat). Pools are ordered by unit index so ties favor the lowest index.
fn matching_contrast(w: &DMatrix<f64>, y: &[f64], t: &[u8], idx: &[usize], k: usize) -> f64 {
    let mut sorted = idx.to_vec();
    sorted.sort_unstable();
    let treated: Vec<usize> = sorted.iter().copied().filter(|&i| t[i] == 1).collect();
    let control: Vec<usize> = sorted.iter().copied().filter(|&i| t[i] == 0).collect();
    let total: f64 = idx
        .iter()
        .map(|&i| {
            if t[i] == 1 {
                y[i] - neighbor_mean(w, y, i, &control, k.min(control.len()))
            } else {
                neighbor_mean(w, y, i, &treated, k.min(treated.len())) - y[i]
            }
        })
        .sum();
    total / idx.len() as f64
}

pub fn ate_matching(y: &[f64], t: &[u8], z: &DMatrix<f64>, k: usize, boot: &BootstrapConfig) -> Result<AteEstimate> {
    let (n1, n0) = group_sizes(y, t, z.nrows())?;
    let k = k.max(1);
    let (w, metric) = whiten(z);
    let all: Vec<usize> = (0..y.len()).collect();
    let ate = matching_contrast(&w, y, t, &all, k);
    let reps = bootstrap_replicates(t, boot, |idx, _| Ok(matching_contrast(&w, y, t, idx, k)))?;
    let (ci_lo, ci_hi) = percentile_interval(&reps, ate);
    let mut warnings = Vec::new();
    if metric == MatchingMetric::Diagonal {
        warnings.push("singular covariance: matched on standardized Euclidean distance".to_string());
    }
    Ok(AteEstimate {
        method: Method::Matching,
        ate,
        ci_lo,
        ci_hi,
        p_value: Some(two_sided_p_value(&reps)),
        n_treated: n1,
        n_control: n0,
        warnings,
    })
}
