use std::path::Path;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::{sidecar_path, Column, ColumnRole, Dataset, DatasetMeta, RoleSet};
use crate::error::{Error, Result};
use crate::seed;

/// Positive-unlabeled view of a dataset: `s = 1` marks observed treated
/// units, `s = 0` the unlabeled pool.
#[derive(Clone, Debug, PartialEq)]
pub struct PuDataset {
    /// Data columns including the label indicator. Its treatment column, when
    /// present, is the hidden truth.
    pub base: Dataset,
    pub s: Vec<u8>,
    pub hidden_truth: Option<Vec<u8>>,
    /// Label frequency P(S=1 | T=1). Recorded only; selection never uses it.
    pub scar_c: Option<f64>,
    pub hide_fraction: Option<f64>,
    pub seed: Option<u64>,
}

impl PuDataset {
    pub fn from_dataset(d: &Dataset) -> Result<Self> {
        let s = d
            .label_indicator()
            .ok_or_else(|| Error::Config("PU data needs a label_indicator column".into()))?;
        Ok(Self {
            base: d.clone(),
            s,
            hidden_truth: d.treatment(),
            scar_c: None,
            hide_fraction: None,
            seed: None,
        })
    }

    pub fn n_units(&self) -> usize {
        self.s.len()
    }

    pub fn positives(&self) -> Vec<usize> {
        (0..self.n_units()).filter(|&i| self.s[i] == 1).collect()
    }

    pub fn unlabeled(&self) -> Vec<usize> {
        (0..self.n_units()).filter(|&i| self.s[i] == 0).collect()
    }

    pub fn meta(&self) -> DatasetMeta {
        DatasetMeta {
            scar_c: self.scar_c,
            hide_fraction: self.hide_fraction,
            seed: self.seed,
            ..self.base.meta()
        }
    }

    /// Writes the CSV and its JSON sidecar (roles, scar_c, seed).
    pub fn save(&self, path: &Path) -> Result<()> {
        self.base.write_csv(std::fs::File::create(path)?)?;
        self.meta().save(&sidecar_path(path))
    }

    pub fn open(path: &Path) -> Result<Self> {
        let meta = DatasetMeta::load(&sidecar_path(path))?;
        let d = super::load_csv(path, &meta.roles)?;
        let mut pu = Self::from_dataset(&d)?;
        pu.scar_c = meta.scar_c;
        pu.hide_fraction = meta.hide_fraction;
        pu.seed = meta.seed;
        Ok(pu)
    }
}

/// Hides a uniformly random `hide_fraction` of the treated units in the
/// unlabeled pool. The hidden count is rounded to the nearest integer and
/// kept within `[1, n_treated − 1]`.
pub fn engineer_pu(d: &Dataset, hide_fraction: f64, seed: u64) -> Result<PuDataset> {
    if !(hide_fraction > 0.0 && hide_fraction < 1.0) {
        return Err(Error::Domain(format!("hide_fraction must lie in (0, 1), got {hide_fraction}")));
    }
    if d.label_name().is_some() || d.column("s").is_some() {
        return Err(Error::Config("dataset already carries a label indicator or an `s` column".into()));
    }
    let truth = d
        .treatment()
        .ok_or_else(|| Error::Config("engineering PU data needs a treatment column".into()))?;
    let treated: Vec<usize> = (0..truth.len()).filter(|&i| truth[i] == 1).collect();
    if treated.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 treated units, found {}",
            treated.len()
        )));
    }
    if treated.len() == truth.len() {
        return Err(Error::InsufficientData("dataset has no control units".into()));
    }
    let n_hide = ((hide_fraction * treated.len() as f64).round() as usize).clamp(1, treated.len() - 1);
    let mut rng = seed::rng(seed);
    let mut s = truth.clone();
    for k in sample(&mut rng, treated.len(), n_hide) {
        s[treated[k]] = 0;
    }
    let base = d.with_column(Column::new(
        "s",
        RoleSet::of(&[ColumnRole::LabelIndicator]),
        s.iter().map(|&v| f64::from(v)).collect(),
    ))?;
    Ok(PuDataset {
        base,
        s,
        hidden_truth: Some(truth),
        scar_c: Some(1.0 - hide_fraction),
        hide_fraction: Some(hide_fraction),
        seed: Some(seed),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Pass,
    Fail,
    Unverifiable,
}

impl Check {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Check::Pass
        } else {
            Check::Fail
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScarStatus {
    ByConstruction,
    Assumed,
}

/// Diagnostics for the PU prerequisites.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// Every labeled unit is truly treated.
    pub no_label_noise: Check,
    /// The unlabeled pool contains at least one true control.
    pub controls_in_unlabeled: Check,
    pub unlabeled_nonempty: Check,
    pub scar: ScarStatus,
}

impl AssumptionReport {
    /// No check failed (unverifiable checks do not count as failures).
    pub fn holds(&self) -> bool {
        ![self.no_label_noise, self.controls_in_unlabeled, self.unlabeled_nonempty].contains(&Check::Fail)
    }
}

pub fn validate_pu_assumptions(pu: &PuDataset) -> AssumptionReport {
    let unlabeled_nonempty = Check::from_bool(pu.s.contains(&0));
    let (no_label_noise, controls_in_unlabeled) = match &pu.hidden_truth {
        Some(truth) => (
            Check::from_bool(pu.s.iter().zip(truth).all(|(&s, &t)| s == 0 || t == 1)),
            Check::from_bool(pu.s.iter().zip(truth).any(|(&s, &t)| s == 0 && t == 0)),
        ),
        None => (Check::Unverifiable, Check::Unverifiable),
    };
    AssumptionReport {
        no_label_noise,
        controls_in_unlabeled,
        unlabeled_nonempty,
        scar: if pu.hide_fraction.is_some() {
            ScarStatus::ByConstruction
        } else {
            ScarStatus::Assumed
        },
    }
}
