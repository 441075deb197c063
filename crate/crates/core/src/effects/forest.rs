use nalgebra::DMatrix;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{bootstrap_replicates, group_sizes, percentile_interval, AteEstimate, BootstrapConfig, Method};
use crate::error::{Error, Result};
use crate::seed::{rng, stream_seed};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Fit each tree on a bootstrap resample of its training rows.
    pub bootstrap: bool,
    /// Trees per forest when refitting inside interval replicates.
    pub bootstrap_trees: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 200,
            max_depth: 6,
            min_leaf: 5,
            bootstrap: true,
            bootstrap_trees: 25,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 || self.bootstrap_trees == 0 {
            return Err(Error::Config("forests need at least one tree".into()));
        }
        if self.min_leaf == 0 {
            return Err(Error::Config("min_leaf must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Axis-aligned regression tree grown by greedy squared-error splits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

struct Grow<'a> {
    z: &'a DMatrix<f64>,
    y: &'a [f64],
    max_depth: usize,
    min_leaf: usize,
    nodes: Vec<Node>,
}

impl Grow<'_> {
    fn best_split(&self, rows: &[usize]) -> Option<(usize, f64)> {
        let n = rows.len();
        let total: f64 = rows.iter().map(|&i| self.y[i]).sum();
        let mean = total / n as f64;
        let sse: f64 = rows.iter().map(|&i| (self.y[i] - mean).powi(2)).sum();
        if sse <= 0.0 {
            return None;
        }
        let base = total * total / n as f64;
        let mut best: Option<(f64, usize, f64)> = None;
        let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(n);
        for f in 0..self.z.ncols() {
            pairs.clear();
            pairs.extend(rows.iter().map(|&i| (self.z[(i, f)], self.y[i])));
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left = 0.0;
            for s in 1..n {
                left += pairs[s - 1].1;
                if s < self.min_leaf || n - s < self.min_leaf || pairs[s - 1].0 == pairs[s].0 {
                    continue;
                }
                let right = total - left;
                // reduction in squared error relative to the unsplit node
                let gain = left * left / s as f64 + right * right / (n - s) as f64 - base;
                if best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, f, 0.5 * (pairs[s - 1].0 + pairs[s].0)));
                }
            }
        }
        best.filter(|&(g, _, _)| g > 1e-12 * sse).map(|(_, f, thr)| (f, thr))
    }

    fn grow(&mut self, rows: &mut [usize], depth: usize) -> usize {
        let id = self.nodes.len();
        let mean = rows.iter().map(|&i| self.y[i]).sum::<f64>() / rows.len() as f64;
        self.nodes.push(Node::Leaf(mean));
        if depth >= self.max_depth || rows.len() < 2 * self.min_leaf {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(rows) else {
            return id;
        };
        rows.sort_by(|&a, &b| self.z[(a, feature)].total_cmp(&self.z[(b, feature)]));
        let cut = rows.partition_point(|&i| self.z[(i, feature)] <= threshold);
        let (l, r) = rows.split_at_mut(cut);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

impl RegressionTree {
    /// Fits on the listed rows of `z` (repeats allowed).
    pub fn fit(z: &DMatrix<f64>, y: &[f64], rows: &[usize], max_depth: usize, min_leaf: usize) -> Self {
        assert!(!rows.is_empty(), "tree needs at least one row");
        let mut g = Grow {
            z,
            y,
            max_depth,
            min_leaf: min_leaf.max(1),
            nodes: Vec::new(),
        };
        let mut rows = rows.to_vec();
        g.grow(&mut rows, 0);
        Self { nodes: g.nodes }
    }

    pub fn predict_row(&self, z: &DMatrix<f64>, i: usize) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if z[(i, feature)] <= threshold { left } else { right },
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionForest {
    pub max_depth: usize,
    pub min_leaf: usize,
    pub tree_seeds: Vec<u64>,
    pub trees: Vec<RegressionTree>,
}

impl RegressionForest {
    pub fn fit(z: &DMatrix<f64>, y: &[f64], rows: &[usize], cfg: &ForestConfig, n_trees: usize, seed: u64) -> Self {
        let tree_seeds: Vec<u64> = (0..n_trees as u64).map(|k| stream_seed(seed, k)).collect();
        let one = |&s: &u64| {
            if cfg.bootstrap {
                let mut r = rng(s);
                let sample: Vec<usize> = (0..rows.len()).map(|_| rows[r.random_range(0..rows.len())]).collect();
                RegressionTree::fit(z, y, &sample, cfg.max_depth, cfg.min_leaf)
            } else {
                RegressionTree::fit(z, y, rows, cfg.max_depth, cfg.min_leaf)
            }
        };
        #[cfg(feature = "parallel")]
        let trees = {
            use rayon::prelude::*;
            tree_seeds.par_iter().map(one).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let trees = tree_seeds.iter().map(one).collect();
        Self {
            max_depth: cfg.max_depth,
            min_leaf: cfg.min_leaf,
            tree_seeds,
            trees,
        }
    }

    pub fn predict_row(&self, z: &DMatrix<f64>, i: usize) -> f64 {
        self.trees.iter().map(|t| t.predict_row(z, i)).sum::<f64>() / self.trees.len() as f64
    }
}

fn tlearner_contrast(y: &[f64], t: &[u8], z: &DMatrix<f64>, idx: &[usize], cfg: &ForestConfig, n_trees: usize, seed: u64) -> f64 {
    let treated: Vec<usize> = idx.iter().copied().filter(|&i| t[i] == 1).collect();
    let control: Vec<usize> = idx.iter().copied().filter(|&i| t[i] == 0).collect();
    let mu1 = RegressionForest::fit(z, y, &treated, cfg, n_trees, stream_seed(seed, 0));
    let mu0 = RegressionForest::fit(z, y, &control, cfg, n_trees, stream_seed(seed, 1));
    idx.iter().map(|&i| mu1.predict_row(z, i) - mu0.predict_row(z, i)).sum::<f64>() / idx.len() as f64
}

/// Separate forests per arm; the effect is the mean predicted gap over all
/// units. No p-value is reported.
pub fn ate_tlearner(y: &[f64], t: &[u8], z: &DMatrix<f64>, cfg: &ForestConfig, boot: &BootstrapConfig) -> Result<AteEstimate> {
    cfg.validate()?;
    let (n1, n0) = group_sizes(y, t, z.nrows())?;
    if n1.min(n0) < cfg.min_leaf {
        return Err(Error::InsufficientData(format!(
            "T-learner needs at least min_leaf = {} units per group, got {n1} treated and {n0} control; use smaller leaves",
            cfg.min_leaf
        )));
    }
    let all: Vec<usize> = (0..y.len()).collect();
    let ate = tlearner_contrast(y, t, z, &all, cfg, cfg.n_trees, cfg.seed);
    let reps = bootstrap_replicates(t, boot, |idx, s| Ok(tlearner_contrast(y, t, z, idx, cfg, cfg.bootstrap_trees, s)))?;
    let (ci_lo, ci_hi) = percentile_interval(&reps, ate);
    Ok(AteEstimate {
        method: Method::TLearner,
        ate,
        ci_lo,
        ci_hi,
        p_value: None,
        n_treated: n1,
        n_control: n0,
        warnings: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stump_matches_hand_averages() {
        // best single cut of y = [1, 2, 6, 8] at x = [0, 1, 2, 3] is between 1 and 2
        let z = DMatrix::from_column_slice(4, 1, &[0.0, 1.0, 2.0, 3.0]);
        let y = [1.0, 2.0, 6.0, 8.0];
        let cfg = ForestConfig {
            n_trees: 3,
            max_depth: 1,
            min_leaf: 1,
            bootstrap: false,
            ..ForestConfig::default()
        };
        let f = RegressionForest::fit(&z, &y, &[0, 1, 2, 3], &cfg, 3, 0);
        let expected = [1.5, 1.5, 7.0, 7.0];
        for (i, e) in expected.iter().enumerate() {
            assert!((f.predict_row(&z, i) - e).abs() < 1e-10);
        }
        assert_eq!(f.trees[0].n_leaves(), 2);
    }

    #[test]
    fn min_leaf_is_respected() {
        let z = DMatrix::from_column_slice(6, 1, &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let y = [0.0, 10.0, 10.0, 10.0, 10.0, 10.0];
        let tree = RegressionTree::fit(&z, &y, &[0, 1, 2, 3, 4, 5], 4, 3);
        assert_eq!(tree.n_leaves(), 2);
        assert!((tree.predict_row(&z, 0) - 20.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn constant_groups_give_exact_gap() {
        let n = 30;
        let z = DMatrix::from_fn(n, 2, |i, j| ((i * (j + 3)) % 7) as f64);
        let t: Vec<u8> = (0..n).map(|i| u8::from(i % 3 == 0)).collect();
        let y: Vec<f64> = t.iter().map(|&v| if v == 1 { 4.0 } else { 1.5 }).collect();
        let cfg = ForestConfig {
            n_trees: 8,
            bootstrap_trees: 4,
            ..ForestConfig::default()
        };
        let e = ate_tlearner(&y, &t, &z, &cfg, &BootstrapConfig { replicates: 100, seed: 1 }).unwrap();
        assert_eq!(e.ate, 2.5);
        assert!(e.p_value.is_none());
    }

    #[test]
    fn small_group_suggests_smaller_leaves() {
        let z = DMatrix::from_column_slice(8, 1, &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        let t = [1, 1, 0, 0, 0, 0, 0, 0];
        let y = [1.0; 8];
        let r = ate_tlearner(&y, &t, &z, &ForestConfig::default(), &BootstrapConfig::default());
        assert!(matches!(r, Err(Error::InsufficientData(m)) if m.contains("smaller leaves")));
    }

    #[test]
    fn forest_is_deterministic() {
        let z = DMatrix::from_fn(40, 2, |i, j| ((i * 7 + j * 3) % 11) as f64);
        let y: Vec<f64> = (0..40).map(|i| (i % 5) as f64).collect();
        let rows: Vec<usize> = (0..40).collect();
        let cfg = ForestConfig::default();
        assert_eq!(
            RegressionForest::fit(&z, &y, &rows, &cfg, 10, 4),
            RegressionForest::fit(&z, &y, &rows, &cfg, 10, 4)
        );
    }
}
