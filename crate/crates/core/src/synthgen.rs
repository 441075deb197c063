//! The linear and nonlinear simulation designs over the benchmark causal graph.
//!
//! Exogenous draws (`x1, x2, x11, x22, x3, x4, x8, u1, u2, u3` and all noise
//! terms) are drawn once per unit; structural equations are then evaluated for
//! the realized or a forced treatment, which makes paired interventions exact.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{Column, ColumnRole, Dataset, RoleSet};
use crate::error::{Error, Result};
use crate::seed::{self, Rng};

/// Standard deviation of every additive noise term.
pub const NOISE_SD: f64 = 0.1;

/// Observed columns, in export order.
pub const COLUMNS: [&str; 14] = [
    "x1", "x11", "x2", "x22", "x3", "x4", "x5", "x7", "x8", "x9", "u3", "m", "t", "y",
];

/// Observed good controls that block every back-door path except the one
/// through `u3`.
pub const OBSERVED_ADJUSTMENT: [&str; 4] = ["x1", "x11", "x2", "x22"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimKind {
    Linear,
    Nonlinear,
}

impl std::str::FromStr for SimKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(SimKind::Linear),
            "nonlinear" | "non-linear" => Ok(SimKind::Nonlinear),
            other => Err(Error::Config(format!("unknown simulation kind `{other}`"))),
        }
    }
}

impl SimKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SimKind::Linear => "linear",
            SimKind::Nonlinear => "nonlinear",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub kind: SimKind,
    pub n: usize,
    pub seed: u64,
    /// Put `u3` in the adjustment set. Off by default: `u3` is exported as a
    /// PU feature but treated as latent by the effect estimators.
    #[serde(default)]
    pub adjust_u3: bool,
}

impl SimConfig {
    pub fn new(kind: SimKind, n: usize, seed: u64) -> Self {
        Self {
            kind,
            n,
            seed,
            adjust_u3: false,
        }
    }
}

/// Per-unit exogenous draws, including the uniform that decides treatment.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Exogenous {
    pub x1: f64,
    pub x2: f64,
    pub x11: f64,
    pub x22: f64,
    pub x3: f64,
    pub x4: f64,
    pub x8: f64,
    pub u1: f64,
    pub u2: f64,
    pub u3: f64,
    pub eps5: f64,
    pub eps_m: f64,
    pub eps_y: f64,
    pub eps7: f64,
    pub eps9: f64,
    pub uniform_t: f64,
}

impl Exogenous {
    fn draw(rng: &mut Rng) -> Self {
        let mut z = || -> f64 { rng.sample(StandardNormal) };
        let (x1, x2, x11, x22, x3, x4, x8) = (z(), z(), z(), z(), z(), z(), z());
        let (u1, u2, u3) = (z(), z(), z());
        let (eps5, eps_m, eps_y, eps7, eps9) = (
            NOISE_SD * z(),
            NOISE_SD * z(),
            NOISE_SD * z(),
            NOISE_SD * z(),
            NOISE_SD * z(),
        );
        let uniform_t = rng.random::<f64>();
        Self {
            x1,
            x2,
            x11,
            x22,
            x3,
            x4,
            x8,
            u1,
            u2,
            u3,
            eps5,
            eps_m,
            eps_y,
            eps7,
            eps9,
            uniform_t,
        }
    }
}

/// One simulated unit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimSample {
    pub exo: Exogenous,
    pub x5: f64,
    pub t: u8,
    pub m: f64,
    pub y: f64,
    pub x7: f64,
    pub x9: f64,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Log-odds of treatment.
pub fn treatment_logit(kind: SimKind, e: &Exogenous) -> f64 {
    match kind {
        SimKind::Linear => {
            1.2 * e.x1 + 0.8 * e.x2 + 1.4 * e.x11 + 0.6 * e.x22 + 0.7 * e.x4 + 1.0 * e.u1 + 1.0 * e.u3
        }
        SimKind::Nonlinear => {
            1.2 * e.x1.tanh()
                + 0.8 * e.x2.sin()
                + 1.4 * e.x11.tanh()
                + 0.6 * e.x22.sin()
                + 0.7 * e.x4.tanh()
                + 1.0 * e.u1
                + 0.8 * e.u3 * e.x1
        }
    }
}

pub fn treatment_probability(kind: SimKind, e: &Exogenous) -> f64 {
    sigmoid(treatment_logit(kind, e))
}

/// Evaluates the structural equations downstream of treatment for a given `t`.
pub fn structural(kind: SimKind, e: &Exogenous, t: u8) -> SimSample {
    let tf = f64::from(t);
    let x5 = 0.6 * e.u1 + 0.6 * e.u2 + e.eps5;
    let (m, y) = match kind {
        SimKind::Linear => {
            let m = 1.5 * tf + 0.7 * e.x8 + 0.5 * e.x2 + 0.3 * e.x22 + e.eps_m;
            let y = 2.0 * m + 0.7 * e.x1 + 0.5 * e.x11 + 0.6 * e.x3 + 1.0 * e.u2 + 1.0 * e.u3 + e.eps_y;
            (m, y)
        }
        SimKind::Nonlinear => {
            let m = 1.5 * tf
                + 0.7 * e.x8.abs().sqrt()
                + 0.5 * e.x2.abs().ln_1p()
                + 0.3 * e.x22
                + 0.1 * e.x2 * e.x8
                + e.eps_m;
            let y = 2.0 * m * m
                + 0.7 * e.x1
                + 0.5 * e.x11
                + 0.6 * e.x3.sin()
                + 0.2 * e.x3 * e.x3
                + 1.0 * e.u2
                + 1.0 * e.u3
                + e.eps_y;
            (m, y)
        }
    };
    SimSample {
        exo: *e,
        x5,
        t,
        m,
        y,
        x7: 1.2 * m + e.eps7,
        x9: 1.0 * tf + 1.0 * y + e.eps9,
    }
}

/// Draws `cfg.n` units with treatment assigned by the logistic model.
pub fn generate_samples(cfg: &SimConfig) -> Result<Vec<SimSample>> {
    if cfg.n == 0 {
        return Err(Error::Config("simulation needs n >= 1".into()));
    }
    let mut rng = seed::rng(cfg.seed);
    Ok((0..cfg.n)
        .map(|_| {
            let e = Exogenous::draw(&mut rng);
            let t = u8::from(e.uniform_t < treatment_probability(cfg.kind, &e));
            structural(cfg.kind, &e, t)
        })
        .collect())
}

fn role(name: &str, adjust_u3: bool) -> RoleSet {
    match name {
        "t" => RoleSet::of(&[ColumnRole::Treatment]),
        "y" => RoleSet::of(&[ColumnRole::Outcome, ColumnRole::Feature]),
        "u3" if adjust_u3 => RoleSet::of(&[ColumnRole::Adjustment]),
        n if OBSERVED_ADJUSTMENT.contains(&n) => RoleSet::of(&[ColumnRole::Adjustment]),
        _ => RoleSet::of(&[ColumnRole::Feature]),
    }
}

fn value(s: &SimSample, name: &str) -> f64 {
    match name {
        "x1" => s.exo.x1,
        "x11" => s.exo.x11,
        "x2" => s.exo.x2,
        "x22" => s.exo.x22,
        "x3" => s.exo.x3,
        "x4" => s.exo.x4,
        "x5" => s.x5,
        "x7" => s.x7,
        "x8" => s.exo.x8,
        "x9" => s.x9,
        "u1" => s.exo.u1,
        "u2" => s.exo.u2,
        "u3" => s.exo.u3,
        "m" => s.m,
        "t" | "hidden_truth" => f64::from(s.t),
        "y" => s.y,
        other => unreachable!("unknown simulated column {other}"),
    }
}

/// Simulated dataset with the observed columns and their roles: `t` is the
/// treatment, `y` the outcome (and a PU feature), `x1, x11, x2, x22` (plus
/// `u3` when `adjust_u3`) the adjustment set, everything else a feature.
pub fn generate(cfg: &SimConfig) -> Result<Dataset> {
    let samples = generate_samples(cfg)?;
    to_dataset(&samples, cfg.adjust_u3)
}

/// Like [`generate`] but also exports the latent `u1, u2` and a
/// `hidden_truth` copy of `t`, none of which carry a role.
pub fn generate_debug(cfg: &SimConfig) -> Result<(Dataset, Vec<(&'static str, Vec<f64>)>)> {
    let samples = generate_samples(cfg)?;
    let extra = ["u1", "u2", "hidden_truth"]
        .iter()
        .map(|n| (*n, samples.iter().map(|s| value(s, n)).collect()))
        .collect();
    Ok((to_dataset(&samples, cfg.adjust_u3)?, extra))
}

fn to_dataset(samples: &[SimSample], adjust_u3: bool) -> Result<Dataset> {
    let columns = COLUMNS
        .iter()
        .map(|name| Column::new(*name, role(name, adjust_u3), samples.iter().map(|s| value(s, name)).collect()))
        .collect();
    Dataset::new(columns, None)
}

/// Monte Carlo ATE under paired interventions: every exogenous draw is shared
/// between the forced `t = 1` and `t = 0` arms.
pub fn true_ate_oracle(kind: SimKind, n_mc: usize, seed: u64) -> Result<f64> {
    let (treated, control) = intervention_means(kind, n_mc, seed)?;
    Ok(treated - control)
}

/// Mean outcome under do(T=1) and under do(T=0), from the same draws.
pub fn intervention_means(kind: SimKind, n_mc: usize, seed: u64) -> Result<(f64, f64)> {
    if n_mc < 10_000 {
        return Err(Error::Config(format!("oracle needs n_mc >= 10^4, got {n_mc}")));
    }
    let mut rng = seed::rng(seed);
    let (mut s1, mut s0) = (0.0, 0.0);
    for _ in 0..n_mc {
        let e = Exogenous::draw(&mut rng);
        s1 += structural(kind, &e, 1).y;
        s0 += structural(kind, &e, 0).y;
    }
    Ok((s1 / n_mc as f64, s0 / n_mc as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mediator_equals_treatment_path_when_other_inputs_vanish() {
        let e = Exogenous::default();
        let s = structural(SimKind::Linear, &e, 1);
        assert_eq!(s.m, 1.5);
        assert_eq!(s.y, 3.0);
    }

    #[test]
    fn zero_draws_give_even_odds() {
        let e = Exogenous::default();
        assert_eq!(treatment_logit(SimKind::Linear, &e), 0.0);
        assert_eq!(treatment_probability(SimKind::Linear, &e), 0.5);
        assert_eq!(treatment_probability(SimKind::Nonlinear, &e), 0.5);
    }

    #[test]
    fn linear_paired_contrast_is_exactly_three_per_unit() {
        let mut rng = seed::rng(11);
        for _ in 0..100 {
            let e = Exogenous::draw(&mut rng);
            let d = structural(SimKind::Linear, &e, 1).y - structural(SimKind::Linear, &e, 0).y;
            assert!((d - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn nonlinear_equations_by_hand() {
        let e = Exogenous {
            x1: 0.5,
            x2: -1.0,
            x8: 4.0,
            x22: 1.0,
            x3: 1.0,
            u3: 2.0,
            ..Exogenous::default()
        };
        let logit = 1.2 * 0.5f64.tanh() + 0.8 * (-1.0f64).sin() + 0.6 * 1.0f64.sin() + 0.8 * 2.0 * 0.5;
        assert!((treatment_logit(SimKind::Nonlinear, &e) - logit).abs() < 1e-12);
        let s = structural(SimKind::Nonlinear, &e, 1);
        let m = 1.5 + 0.7 * 2.0 + 0.5 * 2.0f64.ln() + 0.3 - 0.4;
        assert!((s.m - m).abs() < 1e-12);
        let y = 2.0 * m * m + 0.35 + 0.6 * 1.0f64.sin() + 0.2 + 2.0;
        assert!((s.y - y).abs() < 1e-12);
        assert!((s.x9 - (1.0 + y)).abs() < 1e-12);
        assert!((s.x7 - 1.2 * m).abs() < 1e-12);
    }

    #[test]
    fn dataset_has_observed_columns_and_roles() {
        let d = generate(&SimConfig::new(SimKind::Linear, 50, 3)).unwrap();
        let names: Vec<&str> = d.columns().iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, COLUMNS.to_vec());
        assert_eq!(d.adjustment_names(), vec!["x1", "x11", "x2", "x22"]);
        let x = d.feature_names();
        assert_eq!(x.len(), 13);
        assert!(!x.contains(&"t"));
        assert!(x.contains(&"y") && x.contains(&"m") && x.contains(&"u3"));
        let mut cfg = SimConfig::new(SimKind::Linear, 50, 3);
        cfg.adjust_u3 = true;
        let d = generate(&cfg).unwrap();
        assert_eq!(d.adjustment_names(), vec!["x1", "x11", "x2", "x22", "u3"]);
    }

    #[test]
    fn generation_is_deterministic_given_seed() {
        let a = generate(&SimConfig::new(SimKind::Nonlinear, 200, 5)).unwrap();
        let b = generate(&SimConfig::new(SimKind::Nonlinear, 200, 5)).unwrap();
        let c = generate(&SimConfig::new(SimKind::Nonlinear, 200, 6)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn oracle_rejects_small_budgets_and_is_deterministic() {
        assert!(true_ate_oracle(SimKind::Linear, 100, 0).is_err());
        let a = intervention_means(SimKind::Nonlinear, 10_000, 4).unwrap();
        let b = intervention_means(SimKind::Nonlinear, 10_000, 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(true_ate_oracle(SimKind::Nonlinear, 10_000, 4).unwrap(), a.0 - a.1);
    }
}
