//! Average treatment effect estimators on the (trimmed) analysis sample.
//!
//! Every estimator consumes only the adjustment columns `z`, the binary
//! treatment `t` and the outcome `y`; inverse weighting additionally needs the
//! propensity scores of the same units.

mod bootstrap;
mod forest;
mod ipw;
mod matching;
mod ols;
mod report;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bootstrap::{bootstrap_replicates, percentile_interval, two_sided_p_value, BootstrapConfig};
pub use forest::{ate_tlearner, ForestConfig, RegressionForest, RegressionTree};
pub use ipw::{ate_ipw, hajek};
pub use matching::{ate_matching, MatchingMetric};
pub use ols::{ate_ols, least_squares, LeastSquares};
pub use report::{read_estimates_json, write_estimates_csv, write_estimates_json, EstimateRow};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ols,
    Ipw,
    Matching,
    TLearner,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Ols, Method::Ipw, Method::Matching, Method::TLearner];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ols => "ols",
            Method::Ipw => "ipw",
            Method::Matching => "matching",
            Method::TLearner => "t_learner",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "ols" | "regression" | "linear" => Ok(Method::Ols),
            "ipw" => Ok(Method::Ipw),
            "matching" | "match" => Ok(Method::Matching),
            "t_learner" | "tlearner" => Ok(Method::TLearner),
            other => Err(Error::Config(format!("unknown estimator '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AteEstimate {
    pub method: Method,
    pub ate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub p_value: Option<f64>,
    pub n_treated: usize,
    pub n_control: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl AteEstimate {
    pub fn covers(&self, value: f64) -> bool {
        self.ci_lo <= value && value <= self.ci_hi
    }
}

/// Aligned estimation inputs.
#[derive(Clone, Debug)]
pub struct EffectData<'a> {
    pub y: &'a [f64],
    pub t: &'a [u8],
    pub z: &'a DMatrix<f64>,
    pub z_names: &'a [String],
    pub scores: Option<&'a [f64]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfig {
    pub methods: Vec<Method>,
    /// Neighbors per unit in matching.
    pub k: usize,
    pub forest: ForestConfig,
    pub bootstrap: BootstrapConfig,
    /// Replicates for the T-learner interval, where each replicate refits two
    /// forests.
    pub tlearner_replicates: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            k: 1,
            forest: ForestConfig::default(),
            bootstrap: BootstrapConfig::default(),
            tlearner_replicates: 200,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("no estimators configured".into()));
        }
        if self.k == 0 {
            return Err(Error::Config("matching needs k >= 1".into()));
        }
        self.bootstrap.validate()?;
        BootstrapConfig {
            replicates: self.tlearner_replicates,
            seed: 0,
        }
        .validate()?;
        self.forest.validate()
    }

    /// Reseeds the randomized pieces from one seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.bootstrap.seed = crate::seed::stream_seed(seed, 0);
        self.forest.seed = crate::seed::stream_seed(seed, 1);
        self
    }
}

/// Group sizes, checking alignment and that both groups are present.
pub(crate) fn group_sizes(y: &[f64], t: &[u8], rows: usize) -> Result<(usize, usize)> {
    if y.len() != t.len() || y.len() != rows {
        return Err(Error::Precondition(format!(
            "misaligned inputs: {} outcomes, {} treatments, {} covariate rows",
            y.len(),
            t.len(),
            rows
        )));
    }
    let n1 = t.iter().filter(|&&v| v == 1).count();
    let n0 = t.len() - n1;
    if n1 == 0 || n0 == 0 {
        return Err(Error::Precondition(format!(
            "estimation needs both groups, got {n1} treated and {n0} control units"
        )));
    }
    Ok((n1, n0))
}

/// Runs the configured estimators, in [`Method::ALL`] order, on identical inputs.
pub fn estimate_all(data: &EffectData<'_>, cfg: &EstimatorConfig) -> Result<Vec<AteEstimate>> {
    cfg.validate()?;
    let mut methods = cfg.methods.clone();
    methods.sort();
    methods.dedup();
    methods
        .into_iter()
        .map(|m| match m {
            Method::Ols => ate_ols(data.y, data.t, data.z, data.z_names),
            Method::Ipw => {
                let scores = data.scores.ok_or_else(|| {
                    Error::Precondition("inverse weighting needs propensity scores".into())
                })?;
                ate_ipw(data.y, data.t, scores, &cfg.bootstrap)
            }
            Method::Matching => ate_matching(data.y, data.t, data.z, cfg.k, &cfg.bootstrap),
            Method::TLearner => ate_tlearner(
                data.y,
                data.t,
                data.z,
                &cfg.forest,
                &BootstrapConfig {
                    replicates: cfg.tlearner_replicates,
                    seed: cfg.bootstrap.seed,
                },
            ),
        })
        .collect()
}
