use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::svm::LinearSvm;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assignment {
    Positive,
    ReliableControl,
    Unlabeled,
}

impl Assignment {
    pub fn as_str(self) -> &'static str {
        match self {
            Assignment::Positive => "positive",
            Assignment::ReliableControl => "reliable_control",
            Assignment::Unlabeled => "unlabeled",
        }
    }
}

impl std::str::FromStr for Assignment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "positive" => Ok(Assignment::Positive),
            "reliable_control" => Ok(Assignment::ReliableControl),
            "unlabeled" => Ok(Assignment::Unlabeled),
            other => Err(Error::Config(format!("unknown assignment `{other}`"))),
        }
    }
}

/// Outcome of PU selection: one assignment per unit, so positives, reliable
/// controls and the remaining unlabeled units partition the sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PuSplit {
    pub ids: Vec<String>,
    pub assignments: Vec<Assignment>,
    /// Naive Bayes P(class 1 | x) from the spy step.
    pub nb_posterior: Vec<Option<f64>>,
    /// Decision value of the last SVM, when iSVM ran.
    pub svm_decision: Vec<Option<f64>>,
    pub feature_names: Vec<String>,
    pub spies: Vec<usize>,
    pub threshold: Option<f64>,
    /// Reliable-set size after the spy step and after every iSVM round.
    pub reliable_trace: Vec<usize>,
    pub svm: Option<LinearSvm>,
    /// iSVM stopped because no unlabeled unit changed class.
    pub isvm_converged: Option<bool>,
    /// Accuracy of the last SVM on its own training set.
    pub training_accuracy: Option<f64>,
    pub warnings: Vec<String>,
}

impl PuSplit {
    pub fn n_units(&self) -> usize {
        self.assignments.len()
    }

    fn indices(&self, a: Assignment) -> Vec<usize> {
        (0..self.n_units()).filter(|&i| self.assignments[i] == a).collect()
    }

    pub fn positives(&self) -> Vec<usize> {
        self.indices(Assignment::Positive)
    }

    pub fn reliable_controls(&self) -> Vec<usize> {
        self.indices(Assignment::ReliableControl)
    }

    pub fn remaining_unlabeled(&self) -> Vec<usize> {
        self.indices(Assignment::Unlabeled)
    }

    pub fn reliable_control_ids(&self) -> Vec<&str> {
        self.reliable_controls().into_iter().map(|i| self.ids[i].as_str()).collect()
    }

    /// Final-stage score: SVM decision value if available, else NB posterior.
    pub fn score(&self, i: usize) -> Option<f64> {
        self.svm_decision[i].or(self.nb_posterior[i])
    }

    /// CSV with columns `unit_id, assignment, score`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["unit_id", "assignment", "score"])?;
        for i in 0..self.n_units() {
            let score = self.score(i).map(|s| format!("{s}")).unwrap_or_default();
            w.write_record([self.ids[i].as_str(), self.assignments[i].as_str(), score.as_str()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a split CSV and aligns it to `ids`.
    pub fn read_csv<R: Read>(reader: R, ids: &[String]) -> Result<PuSplit> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut by_id: HashMap<String, (Assignment, Option<f64>)> = HashMap::new();
        for (r, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let id = rec.get(0).unwrap_or("").to_string();
            let a: Assignment = rec.get(1).unwrap_or("").parse()?;
            let score = match rec.get(2).unwrap_or("").trim() {
                "" => None,
                s => Some(s.parse::<f64>().map_err(|_| Error::Parse {
                    row: r + 1,
                    column: "score".into(),
                    message: format!("`{s}` is not a number"),
                })?),
            };
            by_id.insert(id, (a, score));
        }
        let mut assignments = Vec::with_capacity(ids.len());
        let mut scores = Vec::with_capacity(ids.len());
        for id in ids {
            let (a, s) = by_id
                .get(id)
                .ok_or_else(|| Error::Config(format!("split has no row for unit `{id}`")))?;
            assignments.push(*a);
            scores.push(*s);
        }
        Ok(PuSplit {
            ids: ids.to_vec(),
            assignments,
            nb_posterior: vec![None; ids.len()],
            svm_decision: scores,
            feature_names: Vec::new(),
            spies: Vec::new(),
            threshold: None,
            reliable_trace: Vec::new(),
            svm: None,
            isvm_converged: None,
            training_accuracy: None,
            warnings: Vec::new(),
        })
    }
}
