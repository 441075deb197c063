use nalgebra::DMatrix;
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::naive_bayes::fit_gaussian_nb;
use super::split::{Assignment, PuSplit};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpyConfig {
    /// Share of labeled positives hidden as spies; the count is floored and
    /// kept within `[1, n_positives − 1]`.
    pub spy_fraction: f64,
    /// Quantile of spy posteriors used as the threshold; 0 is the lowest spy.
    pub threshold_quantile: f64,
    pub seed: u64,
}

impl Default for SpyConfig {
    fn default() -> Self {
        Self {
            spy_fraction: 0.3,
            threshold_quantile: 0.0,
            seed: 0,
        }
    }
}

/// Linear-interpolation quantile of `values` (sorted copy).
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

pub fn spy_count(n_positives: usize, spy_fraction: f64) -> usize {
    ((spy_fraction * n_positives as f64).floor() as usize).clamp(1, n_positives.saturating_sub(1).max(1))
}

/// SPY reliable-negative extraction on a prepared feature matrix.
///
/// Spies drawn from the labeled positives join the unlabeled pool as class 0,
/// Naive Bayes is fit, and unlabeled non-spy units whose posterior falls
/// strictly below the spy threshold become reliable controls. Spies are
/// returned to the positive set.
pub fn spy_select(
    features: &DMatrix<f64>,
    s: &[u8],
    ids: &[String],
    feature_names: &[String],
    cfg: &SpyConfig,
) -> Result<PuSplit> {
    if !(cfg.spy_fraction > 0.0 && cfg.spy_fraction < 1.0) {
        return Err(Error::Config(format!("spy_fraction must lie in (0, 1), got {}", cfg.spy_fraction)));
    }
    if !(0.0..1.0).contains(&cfg.threshold_quantile) {
        return Err(Error::Config(format!(
            "threshold_quantile must lie in [0, 1), got {}",
            cfg.threshold_quantile
        )));
    }
    let positives: Vec<usize> = (0..s.len()).filter(|&i| s[i] == 1).collect();
    if positives.len() < 2 {
        return Err(Error::InsufficientData("spy step needs at least 2 labeled positives".into()));
    }
    if positives.len() == s.len() {
        return Err(Error::InsufficientData("spy step needs a nonempty unlabeled pool".into()));
    }
    let n_spies = spy_count(positives.len(), cfg.spy_fraction);
    let mut rng = seed::rng(cfg.seed);
    let mut spies: Vec<usize> = sample(&mut rng, positives.len(), n_spies)
        .into_iter()
        .map(|k| positives[k])
        .collect();
    spies.sort_unstable();

    let mut nb_labels = s.to_vec();
    for &i in &spies {
        nb_labels[i] = 0;
    }
    let model = fit_gaussian_nb(features, &nb_labels)?;
    let posterior = model.posteriors(features);
    let spy_posteriors: Vec<f64> = spies.iter().map(|&i| posterior[i]).collect();
    let tau = quantile(&spy_posteriors, cfg.threshold_quantile);

    let assignments: Vec<Assignment> = (0..s.len())
        .map(|i| {
            if s[i] == 1 {
                Assignment::Positive
            } else if posterior[i] < tau {
                Assignment::ReliableControl
            } else {
                Assignment::Unlabeled
            }
        })
        .collect();
    let n_reliable = assignments.iter().filter(|a| **a == Assignment::ReliableControl).count();
    let mut warnings = Vec::new();
    if n_reliable == 0 {
        warnings.push(format!(
            "spy threshold {tau:.3e} selects no reliable controls; consider a higher threshold_quantile"
        ));
    }
    Ok(PuSplit {
        ids: ids.to_vec(),
        assignments,
        nb_posterior: posterior.into_iter().map(Some).collect(),
        svm_decision: vec![None; s.len()],
        feature_names: feature_names.to_vec(),
        spies,
        threshold: Some(tau),
        reliable_trace: vec![n_reliable],
        svm: None,
        isvm_converged: None,
        training_accuracy: None,
        warnings,
    })
}
