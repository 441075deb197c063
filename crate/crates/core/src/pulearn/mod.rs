//! Two-step PU learning: SPY reliable-control extraction with Gaussian Naive
//! Bayes, optionally refined by iterative linear SVM.

mod coefficients;
mod isvm;
mod naive_bayes;
mod spy;
mod split;
mod svm;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureSet, PuDataset, StandardizationParams};
use crate::error::{Error, Result};

pub use coefficients::{export_coefficients, slope_chart, CoefficientRow, CoefficientTable, SlopeRow};
pub use isvm::isvm_refine;
pub use naive_bayes::{fit_gaussian_nb, GaussianNb, VARIANCE_FLOOR};
pub use spy::{quantile, spy_count, spy_select, SpyConfig};
pub use split::{Assignment, PuSplit};
pub use svm::{fit_linear_svm, primal_objective, LinearSvm, SvmConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PuMethod {
    #[serde(rename = "spy", alias = "SPY")]
    Spy,
    #[serde(rename = "spy+isvm", alias = "SPY+iSVM")]
    SpyIsvm,
}

impl PuMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            PuMethod::Spy => "SPY",
            PuMethod::SpyIsvm => "SPY+iSVM",
        }
    }
}

impl std::str::FromStr for PuMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "spy" => Ok(PuMethod::Spy),
            "spy+isvm" | "spy-isvm" | "isvm" => Ok(PuMethod::SpyIsvm),
            other => Err(Error::Config(format!("unknown PU method `{other}` (expected spy or spy+isvm)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PuConfig {
    pub method: PuMethod,
    pub feature_set: FeatureSet,
    pub spy: SpyConfig,
    pub svm: SvmConfig,
    pub max_iters: usize,
    /// z-score features (fit on the pooled sample) before NB and SVM.
    pub standardize: bool,
}

impl Default for PuConfig {
    fn default() -> Self {
        Self {
            method: PuMethod::SpyIsvm,
            feature_set: FeatureSet::Full,
            spy: SpyConfig::default(),
            svm: SvmConfig::default(),
            max_iters: 100,
            standardize: true,
        }
    }
}

/// Feature matrix for PU learning, standardized on the pooled sample when asked.
pub fn feature_matrix(
    pu: &PuDataset,
    set: FeatureSet,
    standardize: bool,
) -> Result<(Vec<String>, DMatrix<f64>, Option<StandardizationParams>)> {
    let names = pu.base.names_for(set);
    if names.is_empty() {
        return Err(Error::Config(format!("feature set {} is empty", set.as_str())));
    }
    let raw = pu.base.matrix(&names)?;
    let owned: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    if !standardize {
        return Ok((owned, raw, None));
    }
    let params = StandardizationParams::fit(&names, &raw)?;
    Ok((owned, params.transform(&raw), Some(params)))
}

pub fn spy_step(pu: &PuDataset, set: FeatureSet, cfg: &SpyConfig, standardize: bool) -> Result<PuSplit> {
    let (names, x, _) = feature_matrix(pu, set, standardize)?;
    spy_select(&x, &pu.s, pu.base.ids(), &names, cfg)
}

/// SPY, optionally followed by iSVM. Units left unlabeled are never promoted
/// to treated.
pub fn run_pu_pipeline(pu: &PuDataset, cfg: &PuConfig) -> Result<PuSplit> {
    let (names, x, _) = feature_matrix(pu, cfg.feature_set, cfg.standardize)?;
    let split = spy_select(&x, &pu.s, pu.base.ids(), &names, &cfg.spy)?;
    match cfg.method {
        PuMethod::Spy => Ok(split),
        PuMethod::SpyIsvm => isvm_refine(&x, &split, &cfg.svm, cfg.max_iters),
    }
}
