use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower bound on every per-class variance.
pub const VARIANCE_FLOOR: f64 = 1e-9;

/// Gaussian Naive Bayes over two classes; index 0 is class 0, index 1 is class 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    pub priors: [f64; 2],
    pub means: [Vec<f64>; 2],
    pub variances: [Vec<f64>; 2],
}

/// Maximum-likelihood fit: class frequencies as priors, per-class means and
/// (biased) variances floored at [`VARIANCE_FLOOR`].
pub fn fit_gaussian_nb(features: &DMatrix<f64>, labels: &[u8]) -> Result<GaussianNb> {
    assert_eq!(features.nrows(), labels.len(), "features and labels must align");
    let d = features.ncols();
    let mut counts = [0usize; 2];
    let mut sums = [vec![0.0; d], vec![0.0; d]];
    for (i, &l) in labels.iter().enumerate() {
        let c = usize::from(l == 1);
        counts[c] += 1;
        for j in 0..d {
            sums[c][j] += features[(i, j)];
        }
    }
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::Training("naive Bayes needs both classes".into()));
    }
    let means = [0, 1].map(|c| sums[c].iter().map(|s| s / counts[c] as f64).collect::<Vec<_>>());
    let mut sq = [vec![0.0; d], vec![0.0; d]];
    for (i, &l) in labels.iter().enumerate() {
        let c = usize::from(l == 1);
        for j in 0..d {
            sq[c][j] += (features[(i, j)] - means[c][j]).powi(2);
        }
    }
    let variances = [0, 1].map(|c| {
        sq[c]
            .iter()
            .map(|s| (s / counts[c] as f64).max(VARIANCE_FLOOR))
            .collect::<Vec<_>>()
    });
    let n = labels.len() as f64;
    Ok(GaussianNb {
        priors: [counts[0] as f64 / n, counts[1] as f64 / n],
        means,
        variances,
    })
}

impl GaussianNb {
    fn log_joint(&self, class: usize, x: &[f64]) -> f64 {
        let ln_2pi = (2.0 * std::f64::consts::PI).ln();
        self.priors[class].ln()
            + x.iter()
                .zip(&self.means[class])
                .zip(&self.variances[class])
                .map(|((v, m), var)| -0.5 * (ln_2pi + var.ln() + (v - m).powi(2) / var))
                .sum::<f64>()
    }

    /// P(class 1 | x), computed in log space.
    pub fn posterior(&self, x: &[f64]) -> f64 {
        let l0 = self.log_joint(0, x);
        let l1 = self.log_joint(1, x);
        // logistic of the log-odds, stable on both tails
        let z = l1 - l0;
        if z >= 0.0 {
            1.0 / (1.0 + (-z).exp())
        } else {
            let e = z.exp();
            e / (1.0 + e)
        }
    }

    pub fn posteriors(&self, features: &DMatrix<f64>) -> Vec<f64> {
        let mut row = vec![0.0; features.ncols()];
        (0..features.nrows())
            .map(|i| {
                for (j, r) in row.iter_mut().enumerate() {
                    *r = features[(i, j)];
                }
                self.posterior(&row)
            })
            .collect()
    }
}
