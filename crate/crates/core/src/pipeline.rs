//! Config-driven end-to-end runs: simulate or load, hide treated units,
//! select reliable controls, fit and trim propensities, estimate, evaluate.
//!
//! Every random stage draws from `stage_seed(master_seed, <stage>)`, so the
//! bundle written by [`PipelineOutput::write`] is reproducible from the
//! manifest alone.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{engineer_pu, load_csv, Dataset, FeatureSet, PuDataset, RoleMap};
use crate::effects::{estimate_all, write_estimates_csv, write_estimates_json, AteEstimate, EffectData, EstimateRow, EstimatorConfig};
use crate::error::{Error, Result, StageContext};
use crate::evalmetrics::{evaluate, write_eval_csv, PuEvalReport};
use crate::propensity::{
    fit_logistic, overlap_histogram, trim, write_histogram_csv, Group, HistogramRow, LogisticConfig, LogisticModel,
    PropensityReport, TrimConfig,
};
use crate::pulearn::{export_coefficients, run_pu_pipeline, CoefficientTable, PuConfig, PuMethod, PuSplit, SpyConfig, SvmConfig};
use crate::seed::stage_seed;
use crate::synthgen::{generate, SimConfig, SimKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Source {
    Simulate {
        kind: SimKind,
        #[serde(default = "default_n")]
        n: usize,
        /// Defaults to the `simulate` stage seed.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
        #[serde(default)]
        adjust_u3: bool,
    },
    Csv {
        path: PathBuf,
        /// Role map (TOML or JSON). Without one the metadata sidecar next to
        /// the CSV is used.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        roles: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
    },
}

fn default_n() -> usize {
    1000
}

impl Default for Source {
    fn default() -> Self {
        Source::Simulate {
            kind: SimKind::Linear,
            n: default_n(),
            seed: None,
            adjust_u3: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PuSettings {
    pub method: PuMethod,
    pub feature_set: FeatureSet,
    pub spy_fraction: f64,
    pub threshold_quantile: f64,
    pub standardize: bool,
    pub max_iters: usize,
    pub svm: SvmConfig,
}

impl Default for PuSettings {
    fn default() -> Self {
        let d = PuConfig::default();
        Self {
            method: d.method,
            feature_set: d.feature_set,
            spy_fraction: d.spy.spy_fraction,
            threshold_quantile: d.spy.threshold_quantile,
            standardize: d.standardize,
            max_iters: d.max_iters,
            svm: d.svm,
        }
    }
}

impl PuSettings {
    pub fn to_config(&self, seed: u64) -> PuConfig {
        PuConfig {
            method: self.method,
            feature_set: self.feature_set,
            spy: SpyConfig {
                spy_fraction: self.spy_fraction,
                threshold_quantile: self.threshold_quantile,
                seed,
            },
            svm: self.svm,
            max_iters: self.max_iters,
            standardize: self.standardize,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub source: Source,
    /// Share of treated units hidden in the unlabeled pool. Ignored when the
    /// source already carries a label indicator.
    pub hide_fraction: f64,
    pub pu: PuSettings,
    pub propensity: LogisticConfig,
    pub histogram_bins: usize,
    /// Common-support bounds for the PU path. Defaults to [0.05, 0.95] for
    /// simulated sources and [0.1, 0.6] for CSV sources.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trim: Option<TrimConfig>,
    /// Bounds for the labeled (real controls) path; untrimmed when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline_trim: Option<TrimConfig>,
    pub estimators: EstimatorConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            master_seed: 0,
            output_dir: PathBuf::from("out"),
            source: Source::default(),
            hide_fraction: 0.3,
            pu: PuSettings::default(),
            propensity: LogisticConfig::default(),
            histogram_bins: 10,
            trim: None,
            baseline_trim: None,
            estimators: EstimatorConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if let Source::Simulate { n, .. } = self.source {
            if n < 2 {
                return Err(Error::Config("simulation needs at least 2 units".into()));
            }
        }
        if !(self.hide_fraction > 0.0 && self.hide_fraction < 1.0) {
            return Err(Error::Config(format!("hide_fraction must lie in (0, 1), got {}", self.hide_fraction)));
        }
        if self.histogram_bins < 2 {
            return Err(Error::Config("histogram_bins must be at least 2".into()));
        }
        for t in self.trim.iter().chain(self.baseline_trim.iter()) {
            TrimConfig::new(t.lo, t.hi)?;
        }
        self.estimators.validate()
    }

    pub fn effective_trim(&self) -> TrimConfig {
        self.trim.unwrap_or(match self.source {
            Source::Simulate { .. } => TrimConfig::SIMULATED,
            Source::Csv { .. } => TrimConfig::REAL_DATA,
        })
    }

    pub fn seed(&self, stage: &str) -> u64 {
        stage_seed(self.master_seed, stage)
    }

    /// Estimator settings with their randomness keyed to the `estimate` stage.
    pub fn seeded_estimators(&self) -> EstimatorConfig {
        self.estimators.clone().with_seed(self.seed("estimate"))
    }
}

const LOAD_HINT: &str = "check the data path, the role map, and that the CSV has no missing cells";
const ENGINEER_HINT: &str = "the data needs at least two treated units, one control and a hide_fraction in (0, 1)";
const PU_HINT: &str = "try the full feature set (feature_set = \"x\") or another spy_fraction";
const PROPENSITY_HINT: &str = "the adjustment columns must be non-constant and both groups present";
const TRIM_HINT: &str = "widen the trim bounds (--trim-lo/--trim-hi) or use a PU setup that selects more controls";
const ESTIMATE_HINT: &str = "check group sizes after trimming and that adjustment columns are not collinear";
const EVALUATE_HINT: &str = "evaluation needs the true treatment column";
const WRITE_HINT: &str = "check that the output directory is writable";

/// Loads or simulates the source data; returns a display name and the data.
pub fn load_source(cfg: &RunConfig) -> Result<(String, Dataset)> {
    match &cfg.source {
        Source::Simulate { kind, n, seed, adjust_u3 } => {
            let sim = SimConfig {
                kind: *kind,
                n: *n,
                seed: seed.unwrap_or_else(|| cfg.seed("simulate")),
                adjust_u3: *adjust_u3,
            };
            Ok((kind.as_str().to_string(), generate(&sim)?))
        }
        Source::Csv { path, roles, name } => {
            let d = match roles {
                Some(r) => load_csv(path, &RoleMap::load(r)?)?,
                None => Dataset::open(path)?,
            };
            let name = name.clone().unwrap_or_else(|| {
                path.file_stem().map_or_else(|| "data".to_string(), |s| s.to_string_lossy().into_owned())
            });
            Ok((name, d))
        }
    }
}

/// The PU view of `d`: used as-is when it has a label indicator, otherwise
/// engineered by hiding treated units.
pub fn to_pu(cfg: &RunConfig, d: &Dataset) -> Result<PuDataset> {
    if d.label_name().is_some() {
        PuDataset::from_dataset(d)
    } else {
        engineer_pu(d, cfg.hide_fraction, cfg.seed("engineer"))
    }
}

pub fn select_controls(cfg: &RunConfig, pu: &PuDataset) -> Result<PuSplit> {
    run_pu_pipeline(pu, &cfg.pu.to_config(cfg.seed("pu")))
}

/// Rows and treatment labels of the analysis sample: labeled positives as
/// treated, reliable controls as controls, in row order.
pub fn analysis_sample(split: &PuSplit) -> (Vec<usize>, Vec<u8>) {
    let mut rows: Vec<(usize, u8)> = split
        .positives()
        .into_iter()
        .map(|i| (i, 1))
        .chain(split.reliable_controls().into_iter().map(|i| (i, 0)))
        .collect();
    rows.sort_unstable();
    rows.into_iter().unzip()
}

/// Fits the propensity model on the adjustment columns of `rows` and scores
/// those rows.
pub fn propensity_scores(d: &Dataset, rows: &[usize], t: &[u8], cfg: &LogisticConfig) -> Result<(LogisticModel, PropensityReport)> {
    let names = d.adjustment_names();
    if names.is_empty() {
        return Err(Error::Config("the role map declares no adjustment columns".into()));
    }
    let z = d.matrix(&names)?.select_rows(rows);
    let model = fit_logistic(&z, t, cfg)?;
    let groups: Vec<Group> = t.iter().map(|&v| if v == 1 { Group::Treated } else { Group::ReliableControl }).collect();
    let local: Vec<usize> = (0..rows.len()).collect();
    let ids: Vec<String> = rows.iter().map(|&i| d.ids()[i].clone()).collect();
    let mut report = PropensityReport::score(&model, &z, &local, &groups, &ids);
    for (u, &i) in report.units.iter_mut().zip(rows) {
        u.index = i;
    }
    if model.separated {
        report
            .warnings
            .push("the adjustment set separates the groups perfectly; scores rely on the ridge penalty".into());
    }
    Ok((model, report))
}

/// Runs the estimators on the retained units of `report`.
pub fn estimate_retained(d: &Dataset, report: &PropensityReport, cfg: &EstimatorConfig) -> Result<Vec<AteEstimate>> {
    let names = d.adjustment_names();
    let units: Vec<_> = report.retained().collect();
    let rows: Vec<usize> = units.iter().map(|u| u.index).collect();
    let t: Vec<u8> = units.iter().map(|u| u8::from(u.group == Group::Treated)).collect();
    let scores: Vec<f64> = units.iter().map(|u| u.score).collect();
    let y: Vec<f64> = rows.iter().map(|&i| d.outcome()[i]).collect();
    let z = d.matrix(&names)?.select_rows(&rows);
    let z_names: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    estimate_all(
        &EffectData {
            y: &y,
            t: &t,
            z: &z,
            z_names: &z_names,
            scores: Some(&scores),
        },
        cfg,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub dataset: String,
    pub config: RunConfig,
    pub seeds: BTreeMap<String, u64>,
    pub trim: Option<TrimConfig>,
    pub n_units: usize,
    pub n_positives: usize,
    pub n_reliable_controls: usize,
    pub retained_treated: usize,
    pub retained_control: usize,
    pub artifacts: Vec<String>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub dataset_name: String,
    pub dataset: Dataset,
    pub pu: PuDataset,
    pub split: PuSplit,
    pub coefficients: Option<CoefficientTable>,
    pub propensity_model: LogisticModel,
    pub propensity: PropensityReport,
    pub histogram: Vec<HistogramRow>,
    pub estimates: Vec<AteEstimate>,
    pub evaluation: Option<PuEvalReport>,
    pub manifest: Manifest,
}

impl PipelineOutput {
    pub fn estimate_rows(&self) -> Vec<EstimateRow> {
        self.estimates
            .iter()
            .map(|e| EstimateRow::new(&self.dataset_name, self.split_method(), self.manifest.config.pu.feature_set.as_str(), e))
            .collect()
    }

    fn split_method(&self) -> &'static str {
        self.manifest.config.pu.method.as_str()
    }

    /// Writes the report bundle into `dir` (created if needed). Only fixed
    /// file names directly inside `dir` are written.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_bundle(self, dir).stage("write", WRITE_HINT)
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_bundle(out: &PipelineOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    out.dataset.save(&dir.join("dataset.csv"))?;
    out.pu.save(&dir.join("pu_dataset.csv"))?;
    out.split.write_csv(create(dir, "pu_split.csv")?)?;
    if let Some(c) = &out.coefficients {
        c.write_csv(create(dir, "coefficients.csv")?)?;
    }
    out.propensity.write_csv(create(dir, "propensity.csv")?)?;
    write_histogram_csv(&out.histogram, create(dir, "propensity_histogram.csv")?)?;
    let rows = out.estimate_rows();
    write_estimates_csv(&rows, create(dir, "estimates.csv")?)?;
    write_estimates_json(&rows, create(dir, "estimates.json")?)?;
    if let Some(e) = &out.evaluation {
        write_eval_csv(std::slice::from_ref(e), create(dir, "evaluation.csv")?)?;
    }
    serde_json::to_writer_pretty(create(dir, "manifest.json")?, &out.manifest)?;
    Ok(())
}

/// The full PU workflow for one config.
pub fn run_pipeline(cfg: &RunConfig) -> Result<PipelineOutput> {
    cfg.validate().stage("config", "fix the configuration value named above")?;
    let (name, dataset) = load_source(cfg).stage("load", LOAD_HINT)?;
    let pu = to_pu(cfg, &dataset).stage("engineer", ENGINEER_HINT)?;
    let split = select_controls(cfg, &pu).stage("pu", PU_HINT)?;
    if split.reliable_controls().is_empty() {
        return Err(Error::InsufficientData("no reliable controls were selected".into())).stage("pu", PU_HINT);
    }
    let coefficients = split.svm.as_ref().map(|m| export_coefficients(m, &split.feature_names));
    let (rows, t) = analysis_sample(&split);
    let (model, scored) = propensity_scores(&pu.base, &rows, &t, &cfg.propensity).stage("propensity", PROPENSITY_HINT)?;
    let bounds = cfg.effective_trim();
    let trimmed = trim(&scored, &bounds).stage("trim", TRIM_HINT)?;
    let histogram = overlap_histogram(&trimmed, cfg.histogram_bins).stage("propensity", PROPENSITY_HINT)?;
    let estimators = cfg.seeded_estimators();
    let estimates = estimate_retained(&pu.base, &trimmed, &estimators).stage("estimate", ESTIMATE_HINT)?;
    let evaluation = match pu.hidden_truth {
        Some(_) => Some(
            evaluate(&pu, &split, &name, cfg.pu.method.as_str(), cfg.pu.feature_set.as_str()).stage("evaluate", EVALUATE_HINT)?,
        ),
        None => None,
    };

    let mut warnings: Vec<String> = split.warnings.clone();
    warnings.extend(scored.warnings.iter().cloned());
    warnings.extend(trimmed.warnings.iter().cloned());
    for e in &estimates {
        warnings.extend(e.warnings.iter().map(|w| format!("{}: {w}", e.method)));
    }
    let mut artifacts: Vec<String> = [
        "dataset.csv",
        "dataset.meta.json",
        "pu_dataset.csv",
        "pu_dataset.meta.json",
        "pu_split.csv",
        "coefficients.csv",
        "propensity.csv",
        "propensity_histogram.csv",
        "estimates.csv",
        "estimates.json",
        "evaluation.csv",
        "manifest.json",
    ]
    .into_iter()
    .map(String::from)
    .collect();
    if coefficients.is_none() {
        artifacts.retain(|a| a != "coefficients.csv");
    }
    if evaluation.is_none() {
        artifacts.retain(|a| a != "evaluation.csv");
    }
    let (retained_treated, retained_control) = trimmed.retained_counts();
    let manifest = Manifest {
        dataset: name.clone(),
        config: cfg.clone(),
        seeds: stage_seeds(cfg),
        trim: Some(bounds),
        n_units: pu.n_units(),
        n_positives: split.positives().len(),
        n_reliable_controls: split.reliable_controls().len(),
        retained_treated,
        retained_control,
        artifacts,
        warnings,
    };
    Ok(PipelineOutput {
        dataset_name: name,
        dataset,
        pu,
        split,
        coefficients,
        propensity_model: model,
        propensity: trimmed,
        histogram,
        estimates,
        evaluation,
        manifest,
    })
}

fn stage_seeds(cfg: &RunConfig) -> BTreeMap<String, u64> {
    let mut seeds: BTreeMap<String, u64> =
        ["engineer", "pu", "estimate"].iter().map(|s| (s.to_string(), cfg.seed(s))).collect();
    if let Source::Simulate { seed, .. } = cfg.source {
        seeds.insert("simulate".into(), seed.unwrap_or_else(|| cfg.seed("simulate")));
    }
    seeds
}

/// Effect estimates using the confirmed treatment labels, without any PU step.
#[derive(Clone, Debug)]
pub struct BaselineOutput {
    pub propensity: PropensityReport,
    pub estimates: Vec<AteEstimate>,
}

pub fn estimate_real_controls(d: &Dataset, cfg: &RunConfig) -> Result<BaselineOutput> {
    let t = d
        .treatment()
        .ok_or_else(|| Error::Config("the real-controls path needs a treatment column".into()))
        .stage("load", LOAD_HINT)?;
    let rows: Vec<usize> = (0..d.n_units()).collect();
    let (_, scored) = propensity_scores(d, &rows, &t, &cfg.propensity).stage("propensity", PROPENSITY_HINT)?;
    let report = match &cfg.baseline_trim {
        Some(b) => trim(&scored, b).stage("trim", TRIM_HINT)?,
        None => scored,
    };
    let estimates = estimate_retained(d, &report, &cfg.seeded_estimators()).stage("estimate", ESTIMATE_HINT)?;
    Ok(BaselineOutput {
        propensity: report,
        estimates,
    })
}
