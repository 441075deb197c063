use nalgebra::DMatrix;

use super::split::{Assignment, PuSplit};
use super::svm::{fit_linear_svm, LinearSvm, SvmConfig};
use crate::error::{Error, Result};

fn select_rows(features: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), features.ncols(), |i, j| features[(rows[i], j)])
}

/// Iterative SVM refinement of a reliable-control set.
///
/// Each round trains a linear SVM on positives (class 1) against the current
/// reliable controls (class 0), scores every unit, and moves unlabeled units
/// with a negative decision value into the reliable set. Reliable units are
/// never revoked. Stops when a round adds nobody or after `max_iters` rounds.
pub fn isvm_refine(
    features: &DMatrix<f64>,
    initial: &PuSplit,
    svm_cfg: &SvmConfig,
    max_iters: usize,
) -> Result<PuSplit> {
    let positives = initial.positives();
    if initial.reliable_controls().is_empty() {
        return Err(Error::Precondition(
            "iSVM needs a nonempty initial reliable-control set".into(),
        ));
    }
    if max_iters == 0 {
        return Err(Error::Config("iSVM needs max_iters >= 1".into()));
    }
    let mut split = initial.clone();
    let mut last: Option<(LinearSvm, Vec<f64>, Vec<usize>, Vec<u8>)> = None;
    let mut converged = false;
    for _ in 0..max_iters {
        let reliable = split.reliable_controls();
        let mut rows = positives.clone();
        rows.extend(&reliable);
        let mut labels = vec![1u8; positives.len()];
        labels.resize(positives.len() + reliable.len(), 0);
        let model = fit_linear_svm(&select_rows(features, &rows), &labels, svm_cfg)?;
        let decisions = model.decisions(features);
        let added: Vec<usize> = split
            .remaining_unlabeled()
            .into_iter()
            .filter(|&i| decisions[i] < 0.0)
            .collect();
        for &i in &added {
            split.assignments[i] = Assignment::ReliableControl;
        }
        split.reliable_trace.push(split.reliable_controls().len());
        last = Some((model, decisions, rows, labels));
        if added.is_empty() {
            converged = true;
            break;
        }
    }
    let (model, decisions, rows, labels) = last.expect("at least one round");
    if !converged {
        split
            .warnings
            .push(format!("iSVM stopped after {max_iters} rounds without reaching a fixed point"));
    }
    if !model.converged {
        split
            .warnings
            .push("last SVM fit hit its iteration budget before meeting the KKT tolerance".into());
    }
    let correct = rows
        .iter()
        .zip(&labels)
        .filter(|(&i, &l)| u8::from(decisions[i] > 0.0) == l)
        .count();
    split.training_accuracy = Some(correct as f64 / rows.len() as f64);
    split.svm_decision = decisions.into_iter().map(Some).collect();
    split.svm = Some(model);
    split.isvm_converged = Some(converged);
    Ok(split)
}
