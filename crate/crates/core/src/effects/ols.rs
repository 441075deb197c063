use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{group_sizes, AteEstimate, Method};
use crate::error::{Error, Result};

/// Relative size below which a triangular pivot counts as collinear.
const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct LeastSquares {
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub residual_df: usize,
    pub sigma2: f64,
}

/// Least squares by Householder QR with classical standard errors.
/// `names` label the columns of `x` for the rank-deficiency error.
pub fn least_squares(x: &DMatrix<f64>, y: &[f64], names: &[String]) -> Result<LeastSquares> {
    let (n, p) = x.shape();
    if n <= p {
        return Err(Error::InsufficientData(format!(
            "regression with {p} columns needs more than {p} rows, got {n}"
        )));
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let scale = (0..p).map(|j| x.column(j).norm()).fold(0.0, f64::max).max(1.0);
    let collinear: Vec<String> = (0..p)
        .filter(|&j| r[(j, j)].abs() <= RANK_TOL * scale)
        .map(|j| names.get(j).cloned().unwrap_or_else(|| format!("column {j}")))
        .collect();
    if !collinear.is_empty() {
        return Err(Error::RankDeficient { columns: collinear });
    }
    let yv = DVector::from_column_slice(y);
    let qty = qr.q().transpose() * &yv;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Training("triangular solve failed".into()))?;
    let resid = &yv - x * &beta;
    let df = n - p;
    let sigma2 = resid.norm_squared() / df as f64;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| Error::Training("triangular inverse failed".into()))?;
    // (X'X)^-1 = R^-1 R^-T, whose diagonal is the squared row norms of R^-1
    let std_errors = (0..p).map(|j| (sigma2 * r_inv.row(j).norm_squared()).sqrt()).collect();
    Ok(LeastSquares {
        coefficients: beta.iter().copied().collect(),
        std_errors,
        residual_df: df,
        sigma2,
    })
}

/// Regression adjustment: the coefficient of `t` in y ~ 1 + t + z, with a
/// normal-theory t interval and two-sided p-value.
pub fn ate_ols(y: &[f64], t: &[u8], z: &DMatrix<f64>, z_names: &[String]) -> Result<AteEstimate> {
    let (n1, n0) = group_sizes(y, t, z.nrows())?;
    let n = y.len();
    let p = z.ncols() + 2;
    let x = DMatrix::from_fn(n, p, |i, j| match j {
        0 => 1.0,
        1 => f64::from(t[i]),
        _ => z[(i, j - 2)],
    });
    let mut names = vec!["intercept".to_string(), "treatment".to_string()];
    names.extend((0..z.ncols()).map(|j| z_names.get(j).cloned().unwrap_or_else(|| format!("z{j}"))));
    let fit = least_squares(&x, y, &names)?;
    let ate = fit.coefficients[1];
    let se = fit.std_errors[1];
    let dist = StudentsT::new(0.0, 1.0, fit.residual_df as f64).map_err(|e| Error::Training(e.to_string()))?;
    let crit = dist.inverse_cdf(0.975);
    let p_value = if se > 0.0 {
        2.0 * dist.sf((ate / se).abs())
    } else if ate == 0.0 {
        1.0
    } else {
        0.0
    };
    Ok(AteEstimate {
        method: Method::Ols,
        ate,
        ci_lo: ate - crit * se,
        ci_hi: ate + crit * se,
        p_value: Some(p_value.clamp(0.0, 1.0)),
        n_treated: n1,
        n_control: n0,
        warnings: Vec::new(),
    })
}
