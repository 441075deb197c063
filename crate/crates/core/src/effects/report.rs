use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::AteEstimate;
use crate::error::Result;

/// One row of the effect table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub dataset: String,
    pub pu_method: String,
    pub feature_set: String,
    pub method: String,
    pub n_treated: usize,
    pub n_control: usize,
    pub ate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub p_value: Option<f64>,
}

impl EstimateRow {
    pub fn new(dataset: &str, pu_method: &str, feature_set: &str, e: &AteEstimate) -> Self {
        Self {
            dataset: dataset.to_string(),
            pu_method: pu_method.to_string(),
            feature_set: feature_set.to_string(),
            method: e.method.as_str().to_string(),
            n_treated: e.n_treated,
            n_control: e.n_control,
            ate: e.ate,
            ci_lo: e.ci_lo,
            ci_hi: e.ci_hi,
            p_value: e.p_value,
        }
    }
}

/// Small p-values in scientific notation, others in full.
fn format_p(p: f64) -> String {
    if p != 0.0 && p < 1e-4 {
        format!("{p:e}")
    } else {
        format!("{p}")
    }
}

/// Writes rows as CSV; a missing p-value is written as `-`.
pub fn write_estimates_csv<W: Write>(rows: &[EstimateRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "dataset", "pu_method", "feature_set", "method", "n_treated", "n_control", "ate", "ci_lo", "ci_hi", "p_value",
    ])?;
    for r in rows {
        w.write_record([
            r.dataset.clone(),
            r.pu_method.clone(),
            r.feature_set.clone(),
            r.method.clone(),
            r.n_treated.to_string(),
            r.n_control.to_string(),
            format!("{}", r.ate),
            format!("{}", r.ci_lo),
            format!("{}", r.ci_hi),
            r.p_value.map_or_else(|| "-".to_string(), format_p),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_estimates_json<W: Write>(rows: &[EstimateRow], writer: W) -> Result<()> {
    serde_json::to_writer_pretty(writer, rows)?;
    Ok(())
}

pub fn read_estimates_json<R: Read>(reader: R) -> Result<Vec<EstimateRow>> {
    Ok(serde_json::from_reader(reader)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effects::Method;

    #[test]
    fn csv_marks_missing_p_value() {
        let e = AteEstimate {
            method: Method::TLearner,
            ate: 1.5,
            ci_lo: 1.0,
            ci_hi: 2.0,
            p_value: None,
            n_treated: 3,
            n_control: 4,
            warnings: vec![],
        };
        let rows = vec![EstimateRow::new("linear", "SPY+iSVM", "X", &e)];
        let mut buf = Vec::new();
        write_estimates_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().nth(1).unwrap().ends_with(",-"));
        let mut json = Vec::new();
        write_estimates_json(&rows, &mut json).unwrap();
        assert_eq!(read_estimates_json(json.as_slice()).unwrap(), rows);
    }
}
