//! Independent reference implementations used as test oracles. Written
//! without the crate's linear algebra so they check it rather than mirror it.

#![allow(dead_code, clippy::needless_range_loop)]

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Least-squares coefficients from the normal equations X'X b = X'y.
pub fn normal_equations(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let p = x[0].len();
    let mut xtx = vec![vec![0.0; p]; p];
    let mut xty = vec![0.0; p];
    for (row, &yi) in x.iter().zip(y) {
        for j in 0..p {
            xty[j] += row[j] * yi;
            for k in 0..p {
                xtx[j][k] += row[j] * row[k];
            }
        }
    }
    gauss_solve(xtx, xty)
}

/// Unpenalized logistic regression with intercept by plain Newton steps.
pub fn newton_logistic(x: &[Vec<f64>], y: &[u8], iters: usize) -> Vec<f64> {
    let p = x[0].len() + 1;
    let mut beta = vec![0.0; p];
    for _ in 0..iters {
        let mut grad = vec![0.0; p];
        let mut hess = vec![vec![0.0; p]; p];
        for (row, &yi) in x.iter().zip(y) {
            let mut xi = vec![1.0];
            xi.extend_from_slice(row);
            let eta: f64 = xi.iter().zip(&beta).map(|(a, b)| a * b).sum();
            let mu = 1.0 / (1.0 + (-eta).exp());
            for j in 0..p {
                grad[j] += (f64::from(yi) - mu) * xi[j];
                for k in 0..p {
                    hess[j][k] += mu * (1.0 - mu) * xi[j] * xi[k];
                }
            }
        }
        let step = gauss_solve(hess, grad);
        for j in 0..p {
            beta[j] += step[j];
        }
    }
    beta
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Seeded standard normal and Bernoulli draws for synthetic test data.
pub struct Normals(pucausal::seed::Rng);

impl Normals {
    pub fn new(seed: u64) -> Self {
        Self(pucausal::seed::rng(seed))
    }

    pub fn next(&mut self) -> f64 {
        use rand::Rng as _;
        self.0.sample(rand_distr::StandardNormal)
    }

    pub fn bernoulli(&mut self, p: f64) -> u8 {
        use rand::Rng as _;
        u8::from(self.0.random::<f64>() < p)
    }
}
