use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

/// z-scoring parameters for one column. Constant columns keep `sd = 1` and
/// are only centered.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaling {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub constant: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    pub columns: Vec<FeatureScaling>,
}

fn scaling(name: &str, values: impl Iterator<Item = f64> + Clone) -> FeatureScaling {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    let constant = !(sd > 1e-12 * mean.abs().max(1.0));
    FeatureScaling {
        name: name.to_string(),
        mean,
        sd: if constant { 1.0 } else { sd },
        constant,
    }
}

impl StandardizationParams {
    /// Fits sample means and standard deviations (n − 1 denominator) per column.
    pub fn fit(names: &[&str], matrix: &DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() < 2 {
            return Err(Error::InsufficientData("standardization needs at least 2 units".into()));
        }
        let columns = names
            .iter()
            .enumerate()
            .map(|(j, name)| scaling(name, matrix.column(j).iter().copied()))
            .collect();
        Ok(Self { columns })
    }

    pub fn transform(&self, matrix: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = matrix.clone();
        for (j, s) in self.columns.iter().enumerate() {
            out.column_mut(j).apply(|v| *v = (*v - s.mean) / s.sd);
        }
        out
    }

    pub fn inverse(&self, matrix: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = matrix.clone();
        for (j, s) in self.columns.iter().enumerate() {
            out.column_mut(j).apply(|v| *v = *v * s.sd + s.mean);
        }
        out
    }

    pub fn constant_columns(&self) -> Vec<&str> {
        self.columns.iter().filter(|c| c.constant).map(|c| c.name.as_str()).collect()
    }

    /// Undoes [`standardize`] on the columns these parameters cover.
    pub fn invert_dataset(&self, d: &Dataset) -> Dataset {
        let mut out = d.clone();
        for c in out.columns_mut() {
            if let Some(s) = self.columns.iter().find(|s| s.name == c.name) {
                c.values.iter_mut().for_each(|v| *v = *v * s.sd + s.mean);
            }
        }
        out
    }
}

/// z-scores every plain feature column. Columns that also carry a treatment,
/// outcome or label role are left untouched.
pub fn standardize(d: &Dataset) -> Result<(Dataset, StandardizationParams)> {
    if d.n_units() < 2 {
        return Err(Error::InsufficientData("standardization needs at least 2 units".into()));
    }
    let mut out = d.clone();
    let mut params = StandardizationParams::default();
    for c in out.columns_mut() {
        if !c.roles.is_plain_feature() {
            continue;
        }
        let s = scaling(&c.name, c.values.iter().copied());
        c.values.iter_mut().for_each(|v| *v = (*v - s.mean) / s.sd);
        params.columns.push(s);
    }
    Ok((out, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Column, ColumnRole, RoleSet};

    fn dataset(cols: Vec<(&str, Vec<f64>)>) -> Dataset {
        let n = cols[0].1.len();
        let mut columns: Vec<Column> = cols
            .into_iter()
            .map(|(name, v)| Column::new(name, RoleSet::of(&[ColumnRole::Feature]), v))
            .collect();
        columns.push(Column::new("t", RoleSet::of(&[ColumnRole::Treatment]), (0..n).map(|i| (i % 2) as f64).collect()));
        columns.push(Column::new("y", RoleSet::of(&[ColumnRole::Outcome]), (0..n).map(|i| i as f64 * 10.0).collect()));
        Dataset::new(columns, None).unwrap()
    }

    #[test]
    fn symmetric_three_points() {
        let (d, p) = standardize(&dataset(vec![("a", vec![1.0, 2.0, 3.0])])).unwrap();
        assert_eq!(d.values("a").unwrap(), &[-1.0, 0.0, 1.0]);
        assert_eq!(p.columns[0].mean, 2.0);
        assert_eq!(p.columns[0].sd, 1.0);
        assert!(!p.columns[0].constant);
    }

    #[test]
    fn constant_column_is_centered_and_flagged() {
        let (d, p) = standardize(&dataset(vec![("c", vec![5.0, 5.0, 5.0])])).unwrap();
        assert_eq!(d.values("c").unwrap(), &[0.0, 0.0, 0.0]);
        assert!(p.columns[0].constant);
        assert!(p.columns[0].sd > 0.0);
        assert_eq!(p.constant_columns(), vec!["c"]);
    }

    #[test]
    fn params_match_independent_moments() {
        let a = vec![0.3, -1.2, 4.4, 2.0, 0.0];
        let b = vec![10.0, 11.5, 9.0, 12.25, 10.5];
        let (d, p) = standardize(&dataset(vec![("a", a.clone()), ("b", b.clone())])).unwrap();
        for (s, raw) in p.columns.iter().zip([&a, &b]) {
            // two-pass moments computed here independently
            let n = raw.len() as f64;
            let m = raw.iter().sum::<f64>() / n;
            let v = raw.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
            assert!((s.mean - m).abs() < 1e-12);
            assert!((s.sd - v.sqrt()).abs() < 1e-12);
            let z = d.values(&s.name).unwrap();
            let zm = z.iter().sum::<f64>() / n;
            let zv = z.iter().map(|x| (x - zm) * (x - zm)).sum::<f64>() / (n - 1.0);
            assert!(zm.abs() < 1e-10 && (zv - 1.0).abs() < 1e-10);
        }
        // treatment and outcome untouched
        assert_eq!(d.values("y").unwrap()[4], 40.0);
        assert_eq!(d.treatment(), dataset(vec![("a", a)]).treatment());
    }

    #[test]
    fn single_unit_is_rejected() {
        assert!(standardize(&dataset(vec![("a", vec![1.0])])).is_err());
    }
}
