//! Logistic propensity model on the adjustment set, common-support trimming
//! and overlap histograms.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticConfig {
    /// Ridge penalty on the slopes (the intercept is not penalized).
    pub l2: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            l2: 1e-6,
            tol: 1e-10,
            max_iters: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    /// Unpenalized Bernoulli log-likelihood at the fit.
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// The linear predictor separates the two groups perfectly; the fit is
    /// finite only because of the penalty.
    pub separated: bool,
}

impl LogisticModel {
    pub fn linear_predictor(&self, x: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        sigmoid(self.linear_predictor(x))
    }

    pub fn predict_all(&self, z: &DMatrix<f64>) -> Vec<f64> {
        (0..z.nrows())
            .map(|i| {
                let row: Vec<f64> = z.row(i).iter().copied().collect();
                self.predict(&row)
            })
            .collect()
    }
}

pub fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^eta) without overflow.
fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

fn design(z: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(z.nrows(), z.ncols() + 1, |i, j| if j == 0 { 1.0 } else { z[(i, j - 1)] })
}

fn log_likelihood(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>) -> f64 {
    let eta = x * beta;
    eta.iter().zip(y.iter()).map(|(e, yi)| yi * e - softplus(*e)).sum()
}

fn penalized(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>, l2: f64) -> f64 {
    let slopes: f64 = beta.iter().skip(1).map(|b| b * b).sum();
    log_likelihood(x, y, beta) - 0.5 * l2 * slopes
}

/// Maximizes the ridge-penalized Bernoulli log-likelihood by Newton's method
/// with step halving.
pub fn fit_logistic(z: &DMatrix<f64>, labels: &[u8], cfg: &LogisticConfig) -> Result<LogisticModel> {
    assert_eq!(z.nrows(), labels.len(), "features and labels must align");
    if !labels.contains(&0) || !labels.contains(&1) {
        return Err(Error::Precondition("propensity model needs both groups".into()));
    }
    if cfg.l2 < 0.0 {
        return Err(Error::Config("l2 penalty must be non-negative".into()));
    }
    let x = design(z);
    let p = x.ncols();
    let y = DVector::from_iterator(labels.len(), labels.iter().map(|&l| f64::from(l)));
    let mut beta = DVector::zeros(p);
    let mut obj = penalized(&x, &y, &beta, cfg.l2);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        iterations += 1;
        let eta = &x * &beta;
        let mu = eta.map(sigmoid);
        let w = mu.map(|m| m * (1.0 - m));
        let mut grad = x.transpose() * (&y - &mu);
        let mut hess = x.transpose() * DMatrix::from_diagonal(&w) * &x;
        for j in 1..p {
            grad[j] -= cfg.l2 * beta[j];
            hess[(j, j)] += cfg.l2;
        }
        let step = match hess.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            None => {
                // nearly singular curvature: fall back to a damped solve
                let mut damped = hess;
                for j in 0..p {
                    damped[(j, j)] += 1e-8;
                }
                damped
                    .lu()
                    .solve(&grad)
                    .ok_or_else(|| Error::Training("singular Hessian in logistic fit".into()))?
            }
        };
        let mut scale = 1.0;
        let mut next = &beta + &step;
        let mut next_obj = penalized(&x, &y, &next, cfg.l2);
        while next_obj < obj && scale > 1e-10 {
            scale *= 0.5;
            next = &beta + &step * scale;
            next_obj = penalized(&x, &y, &next, cfg.l2);
        }
        let change = (&next - &beta).amax();
        beta = next;
        obj = next_obj;
        if change < cfg.tol * (1.0 + beta.amax()) {
            converged = true;
            break;
        }
    }
    let eta = &x * &beta;
    let max_control = (0..labels.len()).filter(|&i| labels[i] == 0).map(|i| eta[i]).fold(f64::NEG_INFINITY, f64::max);
    let min_treated = (0..labels.len()).filter(|&i| labels[i] == 1).map(|i| eta[i]).fold(f64::INFINITY, f64::min);
    Ok(LogisticModel {
        coefficients: beta.iter().skip(1).copied().collect(),
        intercept: beta[0],
        log_likelihood: log_likelihood(&x, &y, &beta),
        iterations,
        converged,
        separated: min_treated > max_control,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Treated,
    ReliableControl,
}

impl Group {
    pub fn as_str(self) -> &'static str {
        match self {
            Group::Treated => "treated",
            Group::ReliableControl => "reliable_control",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrimConfig {
    pub lo: f64,
    pub hi: f64,
}

impl TrimConfig {
    pub const REAL_DATA: TrimConfig = TrimConfig { lo: 0.1, hi: 0.6 };
    pub const SIMULATED: TrimConfig = TrimConfig { lo: 0.05, hi: 0.95 };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(Error::Config(format!("trim bounds need 0 <= lo < hi <= 1, got [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropensityUnit {
    /// Row of the unit in the source dataset.
    pub index: usize,
    pub id: String,
    pub group: Group,
    pub score: f64,
    pub retained: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropensityReport {
    pub units: Vec<PropensityUnit>,
    pub bounds: Option<TrimConfig>,
    pub warnings: Vec<String>,
}

/// Minimum retained units per group before a warning is raised.
pub const MIN_RETAINED_WARNING: usize = 10;

impl PropensityReport {
    /// Scores the units at `rows` of `z` (with their groups) under `model`.
    pub fn score(model: &LogisticModel, z: &DMatrix<f64>, rows: &[usize], groups: &[Group], ids: &[String]) -> Self {
        let units = rows
            .iter()
            .zip(groups)
            .map(|(&i, &g)| {
                let row: Vec<f64> = z.row(i).iter().copied().collect();
                PropensityUnit {
                    index: i,
                    id: ids[i].clone(),
                    group: g,
                    score: model.predict(&row),
                    retained: true,
                }
            })
            .collect();
        Self {
            units,
            bounds: None,
            warnings: Vec::new(),
        }
    }

    pub fn retained(&self) -> impl Iterator<Item = &PropensityUnit> {
        self.units.iter().filter(|u| u.retained)
    }

    /// (treated, control) retained counts.
    pub fn retained_counts(&self) -> (usize, usize) {
        let t = self.retained().filter(|u| u.group == Group::Treated).count();
        (t, self.retained().count() - t)
    }

    pub fn group_sizes(&self) -> (usize, usize) {
        let t = self.units.iter().filter(|u| u.group == Group::Treated).count();
        (t, self.units.len() - t)
    }

    /// CSV with columns `unit_id, group, score, retained`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["unit_id", "group", "score", "retained"])?;
        for u in &self.units {
            w.write_record([
                u.id.clone(),
                u.group.as_str().to_string(),
                format!("{}", u.score),
                u8::from(u.retained).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Keeps exactly the units with `lo <= score <= hi`, in both groups.
pub fn trim(report: &PropensityReport, cfg: &TrimConfig) -> Result<PropensityReport> {
    let mut out = report.clone();
    out.warnings.clear();
    for u in out.units.iter_mut() {
        u.retained = cfg.lo <= u.score && u.score <= cfg.hi;
    }
    out.bounds = Some(*cfg);
    let (t, c) = out.retained_counts();
    if t == 0 || c == 0 {
        return Err(Error::Overlap(format!(
            "trimming to [{}, {}] leaves {t} treated and {c} control units; widen the trim bounds",
            cfg.lo, cfg.hi
        )));
    }
    for (name, n) in [("treated", t), ("control", c)] {
        if n < MIN_RETAINED_WARNING {
            out.warnings.push(format!("only {n} {name} units retained after trimming"));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub group: Group,
    pub count: usize,
}

/// Equal-width bins over [0, 1] per group, over every unit in the report.
/// Rows are grouped by group (treated first), then by bin.
pub fn overlap_histogram(report: &PropensityReport, n_bins: usize) -> Result<Vec<HistogramRow>> {
    if n_bins < 2 {
        return Err(Error::Config("histogram needs at least 2 bins".into()));
    }
    let mut counts = [vec![0usize; n_bins], vec![0usize; n_bins]];
    for u in &report.units {
        let b = ((u.score * n_bins as f64).floor() as usize).min(n_bins - 1);
        counts[usize::from(u.group == Group::ReliableControl)][b] += 1;
    }
    let mut rows = Vec::with_capacity(2 * n_bins);
    for (g, group) in [Group::Treated, Group::ReliableControl].into_iter().enumerate() {
        for (b, &count) in counts[g].iter().enumerate() {
            rows.push(HistogramRow {
                bin_lo: b as f64 / n_bins as f64,
                bin_hi: (b + 1) as f64 / n_bins as f64,
                group,
                count,
            });
        }
    }
    Ok(rows)
}

/// CSV with columns `bin_lo, bin_hi, group, count`.
pub fn write_histogram_csv<W: Write>(rows: &[HistogramRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["bin_lo", "bin_hi", "group", "count"])?;
    for r in rows {
        w.write_record([
            format!("{}", r.bin_lo),
            format!("{}", r.bin_hi),
            r.group.as_str().to_string(),
            r.count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(scores: &[(f64, Group)]) -> PropensityReport {
        PropensityReport {
            units: scores
                .iter()
                .enumerate()
                .map(|(i, &(s, g))| PropensityUnit {
                    index: i,
                    id: i.to_string(),
                    group: g,
                    score: s,
                    retained: true,
                })
                .collect(),
            bounds: None,
            warnings: Vec::new(),
        }
    }

    #[test]
    fn symmetric_data_gives_even_odds_at_origin() {
        let z = DMatrix::from_column_slice(6, 1, &[-2.0, -1.0, 0.5, -0.5, 1.0, 2.0]);
        let m = fit_logistic(&z, &[0, 0, 0, 1, 1, 1], &LogisticConfig::default()).unwrap();
        assert!(m.converged);
        assert!(m.intercept.abs() < 1e-8);
        assert!((m.predict(&[0.0]) - 0.5).abs() < 1e-8);
        assert!(!m.separated);
    }

    #[test]
    fn one_group_is_a_precondition_error() {
        let z = DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 2.0]);
        assert!(matches!(fit_logistic(&z, &[1, 1, 1], &LogisticConfig::default()), Err(Error::Precondition(_))));
    }

    #[test]
    fn separable_data_stays_finite_and_is_flagged() {
        let z = DMatrix::from_column_slice(4, 1, &[-2.0, -1.0, 1.0, 2.0]);
        let m = fit_logistic(&z, &[0, 0, 1, 1], &LogisticConfig { l2: 1e-2, ..LogisticConfig::default() }).unwrap();
        assert!(m.separated);
        assert!(m.coefficients[0].is_finite());
        assert!(m.converged);
    }

    #[test]
    fn trim_keeps_only_scores_inside_bounds() {
        let r = report(&[(0.05, Group::Treated), (0.3, Group::Treated), (0.7, Group::ReliableControl), (0.35, Group::ReliableControl)]);
        let t = trim(&r, &TrimConfig::REAL_DATA).unwrap();
        let kept: Vec<f64> = t.retained().map(|u| u.score).collect();
        assert_eq!(kept, vec![0.3, 0.35]);
        assert_eq!(t.retained_counts(), (1, 1));
        assert_eq!(t.warnings.len(), 2);
    }

    #[test]
    fn full_range_is_identity_and_trim_is_idempotent() {
        let r = report(&[(0.0, Group::Treated), (1.0, Group::ReliableControl), (0.42, Group::Treated)]);
        let t = trim(&r, &TrimConfig::new(0.0, 1.0).unwrap()).unwrap();
        assert_eq!(t.retained().count(), 3);
        let cfg = TrimConfig::new(0.1, 0.6).unwrap();
        let r = report(&[(0.2, Group::Treated), (0.5, Group::ReliableControl), (0.9, Group::Treated)]);
        let once = trim(&r, &cfg).unwrap();
        assert_eq!(trim(&once, &cfg).unwrap(), once);
    }

    #[test]
    fn emptied_group_is_an_overlap_error() {
        let r = report(&[(0.2, Group::Treated), (0.9, Group::ReliableControl)]);
        assert!(matches!(trim(&r, &TrimConfig::REAL_DATA), Err(Error::Overlap(_))));
        assert!(TrimConfig::new(0.6, 0.1).is_err());
    }

    #[test]
    fn histogram_puts_half_in_bin_five() {
        let r = report(&[(0.5, Group::Treated); 7]);
        let h = overlap_histogram(&r, 10).unwrap();
        assert_eq!(h.len(), 20);
        assert_eq!(h[5].count, 7);
        assert_eq!(h.iter().map(|r| r.count).sum::<usize>(), 7);
    }

    #[test]
    fn histogram_counts_sum_to_group_sizes() {
        let r = report(&[(0.0, Group::Treated), (1.0, Group::Treated), (0.25, Group::ReliableControl)]);
        let h = overlap_histogram(&r, 4).unwrap();
        assert_eq!(h.len(), 8);
        let treated: usize = h.iter().filter(|r| r.group == Group::Treated).map(|r| r.count).sum();
        assert_eq!(treated, 2);
        assert_eq!(h[3].count, 1); // score 1.0 falls in the last bin
        assert_eq!(h[4 + 1].count, 1);
        assert!(overlap_histogram(&r, 1).is_err());
    }
}
