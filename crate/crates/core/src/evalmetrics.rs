//! Scoring a reliable-control selection against hidden ground truth.
//!
//! True controls are the positive class here: a true positive is an
//! unlabeled control that was selected, a false positive a hidden treated
//! unit that was selected. Only the unlabeled pool is counted.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dataset::PuDataset;
use crate::error::{Error, Result};
use crate::pulearn::{Assignment, PuSplit};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

/// An exact ratio; undefined when the denominator is zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Self {
        Self { num, den }
    }

    pub fn value(self) -> Option<f64> {
        (self.den > 0).then(|| self.num as f64 / self.den as f64)
    }

    pub fn is_defined(self) -> bool {
        self.den > 0
    }

    /// The ratio in thousandths, rounded half up, computed in integers.
    pub fn thousandths(self) -> Option<u64> {
        (self.den > 0).then(|| (2000 * self.num + self.den) / (2 * self.den))
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.thousandths() {
            Some(m) => write!(f, "{}.{:03}", m / 1000, m % 1000),
            None => f.write_str("undefined"),
        }
    }
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        Self { tp, fp, fn_, tn }
    }

    /// TP / (TP + FN)
    pub fn control_recall(&self) -> Ratio {
        Ratio::new(self.tp, self.tp + self.fn_)
    }

    /// TP / (TP + FP)
    pub fn control_precision(&self) -> Ratio {
        Ratio::new(self.tp, self.tp + self.fp)
    }

    /// FP / (TP + FP)
    pub fn contamination_rate(&self) -> Ratio {
        Ratio::new(self.fp, self.tp + self.fp)
    }

    /// FP / (FP + TN)
    pub fn treated_leakage(&self) -> Ratio {
        Ratio::new(self.fp, self.fp + self.tn)
    }
}

/// Counts over the unlabeled pool of `split`; `truth` is the true treatment
/// of every unit.
pub fn confusion(split: &PuSplit, truth: &[u8]) -> Result<ConfusionCounts> {
    if truth.len() != split.n_units() {
        return Err(Error::Precondition(format!(
            "ground truth has {} units, split has {}",
            truth.len(),
            split.n_units()
        )));
    }
    let mut c = ConfusionCounts::default();
    for (a, &t) in split.assignments.iter().zip(truth) {
        match (a, t) {
            (Assignment::Positive, _) => {}
            (Assignment::ReliableControl, 0) => c.tp += 1,
            (Assignment::ReliableControl, _) => c.fp += 1,
            (Assignment::Unlabeled, 0) => c.fn_ += 1,
            (Assignment::Unlabeled, _) => c.tn += 1,
        }
    }
    Ok(c)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PuEvalReport {
    pub dataset: String,
    pub pu_method: String,
    pub feature_set: String,
    pub n_positives: usize,
    pub n_spies: usize,
    pub counts: ConfusionCounts,
}

impl PuEvalReport {
    pub fn recall(&self) -> Ratio {
        self.counts.control_recall()
    }
    pub fn precision(&self) -> Ratio {
        self.counts.control_precision()
    }
    pub fn contamination(&self) -> Ratio {
        self.counts.contamination_rate()
    }
    pub fn leakage(&self) -> Ratio {
        self.counts.treated_leakage()
    }
    pub fn n_unlabeled_controls(&self) -> u64 {
        self.counts.tp + self.counts.fn_
    }
    pub fn n_unlabeled_treated(&self) -> u64 {
        self.counts.fp + self.counts.tn
    }
}

/// Scores `split` against the hidden truth carried by `pu`.
pub fn evaluate(pu: &PuDataset, split: &PuSplit, dataset: &str, pu_method: &str, feature_set: &str) -> Result<PuEvalReport> {
    let truth = pu
        .hidden_truth
        .as_ref()
        .ok_or_else(|| Error::Precondition("evaluation needs the true treatment column".into()))?;
    Ok(PuEvalReport {
        dataset: dataset.to_string(),
        pu_method: pu_method.to_string(),
        feature_set: feature_set.to_string(),
        n_positives: pu.positives().len(),
        n_spies: split.spies.len(),
        counts: confusion(split, truth)?,
    })
}

pub const REPORT_HEADER: [&str; 15] = [
    "dataset",
    "pu_method",
    "feature_set",
    "n_positives",
    "n_spies",
    "n_unlabeled_controls",
    "n_unlabeled_treated",
    "sel_controls",
    "sel_treated",
    "nonsel_controls",
    "nonsel_treated",
    "recall",
    "precision",
    "contamination",
    "leakage",
];

pub fn write_eval_csv<W: Write>(reports: &[PuEvalReport], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(REPORT_HEADER)?;
    for r in reports {
        let c = r.counts;
        w.write_record([
            r.dataset.clone(),
            r.pu_method.clone(),
            r.feature_set.clone(),
            r.n_positives.to_string(),
            r.n_spies.to_string(),
            r.n_unlabeled_controls().to_string(),
            r.n_unlabeled_treated().to_string(),
            c.tp.to_string(),
            c.fp.to_string(),
            c.fn_.to_string(),
            c.tn.to_string(),
            r.recall().to_string(),
            r.precision().to_string(),
            r.contamination().to_string(),
            r.leakage().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn split(assignments: Vec<Assignment>) -> PuSplit {
        let n = assignments.len();
        PuSplit {
            ids: (0..n).map(|i| i.to_string()).collect(),
            assignments,
            nb_posterior: vec![None; n],
            svm_decision: vec![None; n],
            feature_names: vec![],
            spies: vec![],
            threshold: None,
            reliable_trace: vec![],
            svm: None,
            isvm_converged: None,
            training_accuracy: None,
            warnings: vec![],
        }
    }

    #[test]
    fn linear_spy_z_row() {
        let c = ConfusionCounts::new(334, 31, 171, 118);
        assert_eq!(c.control_recall().to_string(), "0.661");
        assert_eq!(c.control_precision().to_string(), "0.915");
        assert_eq!(c.contamination_rate().to_string(), "0.085");
        assert_eq!(c.treated_leakage().to_string(), "0.208");
        let c = ConfusionCounts::new(505, 0, 0, 149);
        assert_eq!(c.control_recall().to_string(), "1.000");
        assert_eq!(c.treated_leakage().to_string(), "0.000");
    }

    #[test]
    fn zero_denominator_is_undefined() {
        let c = ConfusionCounts::new(0, 0, 3, 2);
        assert_eq!(c.control_precision().to_string(), "undefined");
        assert_eq!(c.control_precision().value(), None);
        assert_eq!(c.control_recall().value(), Some(0.0));
    }

    #[test]
    fn rounding_is_half_up() {
        assert_eq!(Ratio::new(1, 2000).to_string(), "0.001");
        assert_eq!(Ratio::new(1, 2001).to_string(), "0.000");
        assert_eq!(Ratio::new(2, 3).to_string(), "0.667");
    }

    #[test]
    fn counting_skips_labeled_positives() {
        use Assignment::*;
        let s = split(vec![Positive, ReliableControl, ReliableControl, Unlabeled, Unlabeled, Positive]);
        let c = confusion(&s, &[1, 0, 1, 0, 1, 1]).unwrap();
        assert_eq!(c, ConfusionCounts::new(1, 1, 1, 1));
        let none = split(vec![Positive, Unlabeled, Unlabeled, Unlabeled]);
        assert_eq!(confusion(&none, &[1, 0, 0, 1]).unwrap(), ConfusionCounts::new(0, 0, 2, 1));
        assert!(confusion(&none, &[1, 0]).is_err());
    }
}
