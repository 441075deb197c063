//! Browser bindings. Every export takes plain arguments and returns a JSON
//! string that `www/main.js` draws onto canvases.

use pucausal::dataset::FeatureSet;
use pucausal::effects::Method;
use pucausal::evalmetrics::{evaluate, Ratio};
use pucausal::pipeline::{analysis_sample, load_source, propensity_scores, run_pipeline, select_controls, to_pu, RunConfig, Source};
use pucausal::propensity::{overlap_histogram, trim, TrimConfig};
use pucausal::pulearn::{export_coefficients, Assignment, PuMethod};
use pucausal::synthgen::{true_ate_oracle, SimKind};
use pucausal::{Error, Result};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

const ORACLE_DRAWS: usize = 200_000;

fn config(kind: &str, n: usize, seed: u32, method: &str, feature_set: &str) -> Result<RunConfig> {
    let kind: SimKind = kind.parse()?;
    let mut cfg = RunConfig {
        master_seed: u64::from(seed),
        source: Source::Simulate { kind, n, seed: None, adjust_u3: false },
        ..RunConfig::default()
    };
    cfg.pu.method = method.parse::<PuMethod>()?;
    cfg.pu.feature_set = feature_set.parse::<FeatureSet>()?;
    cfg.validate()?;
    Ok(cfg)
}

fn ratio(r: Ratio) -> Value {
    json!({ "value": r.value(), "text": r.to_string() })
}

pub fn select_json(kind: &str, n: usize, seed: u32, method: &str, feature_set: &str) -> Result<Value> {
    let cfg = config(kind, n, seed, method, feature_set)?;
    let (name, d) = load_source(&cfg)?;
    let pu = to_pu(&cfg, &d)?;
    let split = select_controls(&cfg, &pu)?;
    let report = evaluate(&pu, &split, &name, method, feature_set)?;
    let truth = pu.hidden_truth.clone().unwrap_or_default();
    // one point per unlabeled unit: final score, true arm, selected or not
    let points: Vec<Value> = pu
        .unlabeled()
        .into_iter()
        .filter_map(|i| {
            split.score(i).map(|s| {
                json!({
                    "score": s,
                    "treated": truth.get(i) == Some(&1),
                    "reliable": split.assignments[i] == Assignment::ReliableControl,
                })
            })
        })
        .collect();
    let coefficients = split.svm.as_ref().map(|m| export_coefficients(m, &split.feature_names));
    Ok(json!({
        "n_units": pu.n_units(),
        "n_positives": report.n_positives,
        "n_spies": report.n_spies,
        "n_reliable": split.reliable_controls().len(),
        "threshold": split.threshold,
        "trace": split.reliable_trace,
        "recall": ratio(report.recall()),
        "precision": ratio(report.precision()),
        "contamination": ratio(report.contamination()),
        "leakage": ratio(report.leakage()),
        "points": points,
        "coefficients": coefficients,
        "warnings": split.warnings,
    }))
}

pub fn overlap_json(kind: &str, n: usize, seed: u32, lo: f64, hi: f64, bins: usize) -> Result<Value> {
    let cfg = config(kind, n, seed, "spy+isvm", "z")?;
    let (_, d) = load_source(&cfg)?;
    let pu = to_pu(&cfg, &d)?;
    let split = select_controls(&cfg, &pu)?;
    let (rows, t) = analysis_sample(&split);
    let (model, report) = propensity_scores(&d, &rows, &t, &cfg.propensity)?;
    let before = overlap_histogram(&report, bins)?;
    let trimmed = trim(&report, &TrimConfig::new(lo, hi)?);
    let (after, retained, warnings) = match &trimmed {
        Ok(r) => (Some(overlap_histogram(r, bins)?), Some(r.retained_counts()), r.warnings.clone()),
        Err(e) => (None, None, vec![e.to_string()]),
    };
    Ok(json!({
        "bins": bins,
        "bounds": [lo, hi],
        "group_sizes": report.group_sizes(),
        "before": before,
        "after": after,
        "retained": retained,
        "coefficients": model.coefficients,
        "intercept": model.intercept,
        "separated": model.separated,
        "warnings": warnings,
    }))
}

pub fn estimate_json(kind: &str, n: usize, seed: u32, lo: f64, hi: f64, replicates: usize) -> Result<Value> {
    let mut cfg = config(kind, n, seed, "spy+isvm", "z")?;
    cfg.trim = Some(TrimConfig::new(lo, hi)?);
    cfg.estimators.bootstrap.replicates = replicates;
    cfg.estimators.tlearner_replicates = replicates;
    cfg.estimators.forest.n_trees = 50;
    let out = run_pipeline(&cfg)?;
    let oracle = true_ate_oracle(kind.parse()?, ORACLE_DRAWS, u64::from(seed))?;
    let rows: Vec<Value> = out
        .estimates
        .iter()
        .map(|e| {
            json!({
                "method": e.method.as_str(),
                "ate": e.ate,
                "ci": [e.ci_lo, e.ci_hi],
                "p_value": e.p_value,
                "covers_oracle": e.covers(oracle),
                "warnings": e.warnings,
            })
        })
        .collect();
    Ok(json!({
        "oracle": oracle,
        "methods": Method::ALL.iter().map(|m| m.as_str()).collect::<Vec<_>>(),
        "n_treated": out.manifest.retained_treated,
        "n_control": out.manifest.retained_control,
        "estimates": rows,
        "warnings": out.manifest.warnings,
    }))
}

fn to_js(r: Result<Value>) -> std::result::Result<String, JsValue> {
    r.map(|v| v.to_string()).map_err(|e: Error| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen]
pub fn select(kind: &str, n: usize, seed: u32, method: &str, feature_set: &str) -> std::result::Result<String, JsValue> {
    to_js(select_json(kind, n, seed, method, feature_set))
}

#[wasm_bindgen]
pub fn overlap(kind: &str, n: usize, seed: u32, lo: f64, hi: f64, bins: usize) -> std::result::Result<String, JsValue> {
    to_js(overlap_json(kind, n, seed, lo, hi, bins))
}

#[wasm_bindgen]
pub fn estimate(kind: &str, n: usize, seed: u32, lo: f64, hi: f64, replicates: usize) -> std::result::Result<String, JsValue> {
    to_js(estimate_json(kind, n, seed, lo, hi, replicates))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selection_reports_metrics_and_points() {
        let v = select_json("linear", 400, 3, "spy+isvm", "x").unwrap();
        assert_eq!(v["n_units"], 400);
        let r = v["recall"]["value"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&r));
        let points = v["points"].as_array().unwrap();
        let reliable = points.iter().filter(|p| p["reliable"] == true).count();
        assert_eq!(reliable as u64, v["n_reliable"].as_u64().unwrap());
        assert!(v["coefficients"]["rows"].is_array());
    }

    #[test]
    fn overlap_histograms_cover_both_groups() {
        let v = overlap_json("linear", 400, 3, 0.05, 0.95, 8).unwrap();
        assert_eq!(v["before"].as_array().unwrap().len(), 16);
        let total: u64 = v["before"].as_array().unwrap().iter().map(|b| b["count"].as_u64().unwrap()).sum();
        let sizes = v["group_sizes"].as_array().unwrap();
        assert_eq!(total, sizes[0].as_u64().unwrap() + sizes[1].as_u64().unwrap());
    }

    #[test]
    fn narrow_trim_is_reported_not_thrown() {
        let v = overlap_json("linear", 300, 1, 0.499, 0.5, 5).unwrap();
        assert!(v["after"].is_null() || v["retained"].is_array());
    }

    #[test]
    fn estimates_carry_the_oracle() {
        let v = estimate_json("linear", 400, 5, 0.05, 0.95, 100).unwrap();
        assert!((v["oracle"].as_f64().unwrap() - 3.0).abs() < 0.1);
        assert_eq!(v["estimates"].as_array().unwrap().len(), 4);
    }

    #[test]
    fn bad_names_are_errors() {
        assert!(select_json("cubic", 100, 1, "spy", "x").is_err());
        assert!(select_json("linear", 100, 1, "magic", "x").is_err());
    }
}
