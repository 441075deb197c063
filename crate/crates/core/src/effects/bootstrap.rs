//! Stratified percentile bootstrap shared by the resampling estimators.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pulearn::quantile;
use crate::seed::{rng, stream_seed};

pub const MIN_REPLICATES: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            replicates: 1000,
            seed: 0,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates < MIN_REPLICATES {
            return Err(Error::Config(format!(
                "bootstrap needs at least {MIN_REPLICATES} replicates, got {}",
                self.replicates
            )));
        }
        Ok(())
    }
}

/// Resamples treated and control units separately (keeping group sizes) and
/// evaluates `stat(indices, replicate_seed)` per replicate. Replicate `b`
/// draws from its own stream, so the output does not depend on scheduling.
pub fn bootstrap_replicates<F>(t: &[u8], cfg: &BootstrapConfig, stat: F) -> Result<Vec<f64>>
where
    F: Fn(&[usize], u64) -> Result<f64> + Sync,
{
    cfg.validate()?;
    let treated: Vec<usize> = (0..t.len()).filter(|&i| t[i] == 1).collect();
    let control: Vec<usize> = (0..t.len()).filter(|&i| t[i] == 0).collect();
    let one = |b: usize| -> Result<f64> {
        let seed = stream_seed(cfg.seed, b as u64);
        let mut r = rng(seed);
        let mut idx = Vec::with_capacity(t.len());
        for group in [&treated, &control] {
            for _ in 0..group.len() {
                idx.push(group[r.random_range(0..group.len())]);
            }
        }
        stat(&idx, seed)
    };
    #[cfg(feature = "parallel")]
    let out: Vec<Result<f64>> = {
        use rayon::prelude::*;
        (0..cfg.replicates).into_par_iter().map(one).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let out: Vec<Result<f64>> = (0..cfg.replicates).map(one).collect();
    out.into_iter().collect()
}

/// 95% percentile interval, widened if needed so it contains `point`.
pub fn percentile_interval(replicates: &[f64], point: f64) -> (f64, f64) {
    let lo = quantile(replicates, 0.025);
    let hi = quantile(replicates, 0.975);
    (lo.min(point), hi.max(point))
}

/// Two-sided bootstrap test of a zero effect: twice the smaller tail mass of
/// the replicate distribution on either side of zero, with the usual +1
/// correction, capped at 1.
pub fn two_sided_p_value(replicates: &[f64]) -> f64 {
    let b = replicates.len() as f64;
    let below = replicates.iter().filter(|&&v| v <= 0.0).count() as f64;
    let above = replicates.iter().filter(|&&v| v >= 0.0).count() as f64;
    (2.0 * (1.0 + below.min(above)) / (b + 1.0)).min(1.0)
}
