//! The SMO solver against a brute-force minimization of the primal objective.

use nalgebra::DMatrix;
use pucausal::pulearn::{fit_linear_svm, SvmConfig};

/// Independent hinge-loss primal: 0.5 |w|^2 + C * sum max(0, 1 - y (w.x + b)).
fn primal(w: [f64; 2], b: f64, c: f64, pts: &[([f64; 2], f64)]) -> f64 {
    let hinge: f64 = pts
        .iter()
        .map(|(x, y)| (1.0 - y * (w[0] * x[0] + w[1] * x[1] + b)).max(0.0))
        .sum();
    0.5 * (w[0] * w[0] + w[1] * w[1]) + c * hinge
}

/// Nested grid search: a full 3-D grid around the incumbent, shrinking tenfold
/// per level.
fn grid_minimum(c: f64, pts: &[([f64; 2], f64)]) -> f64 {
    let mut center = [0.0, 0.0, 0.0];
    let mut half = 4.0;
    let steps = 40;
    let mut best = f64::INFINITY;
    for _ in 0..6 {
        let h = half / f64::from(steps);
        let mut arg = center;
        for i in -steps..=steps {
            for j in -steps..=steps {
                for k in -steps..=steps {
                    let p = [
                        center[0] + f64::from(i) * h,
                        center[1] + f64::from(j) * h,
                        center[2] + f64::from(k) * h,
                    ];
                    let v = primal([p[0], p[1]], p[2], c, pts);
                    if v < best {
                        best = v;
                        arg = p;
                    }
                }
            }
        }
        center = arg;
        half /= 10.0;
    }
    best
}

fn check(c: f64, pts: &[([f64; 2], f64)]) {
    let x = DMatrix::from_fn(pts.len(), 2, |i, j| pts[i].0[j]);
    let labels: Vec<u8> = pts.iter().map(|p| u8::from(p.1 > 0.0)).collect();
    let svm = fit_linear_svm(&x, &labels, &SvmConfig { c, tol: 1e-8, max_epochs: 10_000 }).unwrap();
    assert!(svm.converged);
    let ours = primal([svm.weights[0], svm.weights[1]], svm.bias, c, pts);
    let grid = grid_minimum(c, pts);
    assert!(ours <= grid + 1e-6, "solver {ours} above grid {grid}");
    assert!(grid - ours <= 1e-3, "solver {ours} vs grid {grid}");
}

#[test]
fn overlapping_classes_match_grid_minimum() {
    let pts = [
        ([0.0, 0.2], 1.0),
        ([1.0, 1.1], 1.0),
        ([0.4, -0.6], 1.0),
        ([1.5, 0.1], 1.0),
        ([-0.3, 0.9], 1.0),
        ([0.2, 0.0], -1.0),
        ([-1.0, -0.4], -1.0),
        ([-0.5, 0.3], -1.0),
        ([-1.4, 0.8], -1.0),
        ([0.6, -1.2], -1.0),
    ];
    check(1.0, &pts);
    check(0.3, &pts);
}

#[test]
fn separable_classes_match_grid_minimum() {
    let pts = [
        ([2.0, 1.0], 1.0),
        ([1.5, 2.0], 1.0),
        ([2.5, 2.5], 1.0),
        ([-1.0, -0.5], -1.0),
        ([-2.0, 0.5], -1.0),
        ([-0.5, -2.0], -1.0),
    ];
    check(1.0, &pts);
    check(10.0, &pts);
}
