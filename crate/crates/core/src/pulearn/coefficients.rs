use std::io::Write;

use serde::{Deserialize, Serialize};

use super::svm::LinearSvm;
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub feature: String,
    pub coefficient: f64,
    /// Coefficient divided by the largest absolute coefficient.
    pub normalized: f64,
    /// 1-based rank by absolute coefficient.
    pub rank: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTable {
    pub rows: Vec<CoefficientRow>,
    pub all_zero: bool,
}

/// Ranks SVM weights by magnitude, normalized by the largest one. Ties keep
/// feature order.
pub fn export_coefficients(model: &LinearSvm, feature_names: &[String]) -> CoefficientTable {
    assert_eq!(model.weights.len(), feature_names.len(), "one name per weight");
    let max_abs = model.weights.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    let all_zero = max_abs == 0.0;
    let mut order: Vec<usize> = (0..model.weights.len()).collect();
    order.sort_by(|&a, &b| model.weights[b].abs().total_cmp(&model.weights[a].abs()).then(a.cmp(&b)));
    let rows = order
        .into_iter()
        .enumerate()
        .map(|(r, j)| CoefficientRow {
            feature: feature_names[j].clone(),
            coefficient: model.weights[j],
            normalized: if all_zero { 0.0 } else { model.weights[j] / max_abs },
            rank: r + 1,
        })
        .collect();
    CoefficientTable { rows, all_zero }
}

impl CoefficientTable {
    pub fn top(&self, k: usize) -> &[CoefficientRow] {
        &self.rows[..k.min(self.rows.len())]
    }

    pub fn get(&self, feature: &str) -> Option<&CoefficientRow> {
        self.rows.iter().find(|r| r.feature == feature)
    }

    /// CSV with columns `feature, coefficient, normalized, rank`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["feature", "coefficient", "normalized", "rank"])?;
        for r in &self.rows {
            w.write_record([
                r.feature.clone(),
                format!("{}", r.coefficient),
                format!("{}", r.normalized),
                r.rank.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One line of a Z-versus-X slope chart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeRow {
    pub feature: String,
    /// Normalized coefficient in the Z-trained model; 0 when absent there.
    pub z_normalized: f64,
    pub x_normalized: f64,
    pub newly_introduced: bool,
}

/// Joins a Z-trained and an X-trained table, keeping features in X-table
/// rank order.
pub fn slope_chart(z_table: &CoefficientTable, x_table: &CoefficientTable) -> Vec<SlopeRow> {
    let mut rows: Vec<SlopeRow> = x_table
        .rows
        .iter()
        .map(|x| {
            let z = z_table.get(&x.feature);
            SlopeRow {
                feature: x.feature.clone(),
                z_normalized: z.map_or(0.0, |z| z.normalized),
                x_normalized: x.normalized,
                newly_introduced: z.is_none(),
            }
        })
        .collect();
    for z in &z_table.rows {
        if x_table.get(&z.feature).is_none() {
            rows.push(SlopeRow {
                feature: z.feature.clone(),
                z_normalized: z.normalized,
                x_normalized: 0.0,
                newly_introduced: false,
            });
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(w: Vec<f64>) -> LinearSvm {
        LinearSvm {
            weights: w,
            bias: 0.0,
            c: 1.0,
            iterations: 0,
            converged: true,
            kkt_gap: 0.0,
            objective: 0.0,
        }
    }

    #[test]
    fn max_abs_normalization_and_ranking() {
        let t = export_coefficients(&model(vec![2.0, -1.0]), &["a".into(), "b".into()]);
        assert_eq!(t.rows[0].feature, "a");
        assert_eq!(t.rows[0].normalized, 1.0);
        assert_eq!(t.rows[1].feature, "b");
        assert_eq!(t.rows[1].normalized, -0.5);
        assert_eq!(t.rows[1].rank, 2);
        assert!(!t.all_zero);
    }

    #[test]
    fn negative_weight_can_rank_first() {
        let t = export_coefficients(&model(vec![0.5, -3.0, 1.0]), &["a".into(), "b".into(), "c".into()]);
        let order: Vec<&str> = t.rows.iter().map(|r| r.feature.as_str()).collect();
        assert_eq!(order, vec!["b", "c", "a"]);
        assert_eq!(t.top(2).len(), 2);
    }

    #[test]
    fn zero_weights_are_flagged() {
        let t = export_coefficients(&model(vec![0.0, 0.0]), &["a".into(), "b".into()]);
        assert!(t.all_zero);
        assert!(t.rows.iter().all(|r| r.normalized == 0.0));
    }
}
