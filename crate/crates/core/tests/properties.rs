//! Randomized invariants across modules.

mod common;

use common::{normal_equations, Normals};
use nalgebra::DMatrix;
use proptest::prelude::*;
use pucausal::dataset::{engineer_pu, standardize, FeatureSet, StandardizationParams};
use pucausal::effects::{ate_ipw, ate_matching, ate_ols, hajek, BootstrapConfig};
use pucausal::evalmetrics::{confusion, ConfusionCounts};
use pucausal::propensity::{overlap_histogram, trim, Group, PropensityReport, PropensityUnit, TrimConfig};
use pucausal::pulearn::{isvm_refine, quantile, run_pu_pipeline, spy_step, Assignment, PuConfig, PuMethod, SpyConfig, SvmConfig};
use pucausal::synthgen::{generate, SimConfig, SimKind};

const BOOT: BootstrapConfig = BootstrapConfig { replicates: 100, seed: 1 };

fn groups() -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..=1, 6..40).prop_filter("both groups", |t| t.contains(&0) && t.contains(&1))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn constant_propensity_weighting_is_difference_of_means(t in groups(), e in 0.05f64..0.95, shift in -5.0f64..5.0) {
        let y: Vec<f64> = (0..t.len()).map(|i| (i as f64 * 0.37).sin() * 4.0 + shift).collect();
        let est = ate_ipw(&y, &t, &vec![e; t.len()], &BOOT).unwrap();
        let mean = |g: u8| {
            let v: Vec<f64> = (0..t.len()).filter(|&i| t[i] == g).map(|i| y[i]).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        prop_assert!((est.ate - (mean(1) - mean(0))).abs() <= 1e-12);
        prop_assert!(est.ci_lo <= est.ate && est.ate <= est.ci_hi);
        let p = est.p_value.unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn regression_matches_normal_equations_and_is_affine_invariant(seed in 0u64..1000, scale in 0.1f64..10.0, offset in -50.0f64..50.0) {
        let mut r = Normals::new(seed);
        let n = 30;
        let t: Vec<u8> = (0..n).map(|i| (i % 3 == 0) as u8).collect();
        let z = DMatrix::from_fn(n, 2, |_, _| r.next());
        let y: Vec<f64> = (0..n).map(|i| 1.5 * f64::from(t[i]) + z[(i, 0)] - z[(i, 1)] + r.next()).collect();
        let names = vec!["a".to_string(), "b".to_string()];
        let est = ate_ols(&y, &t, &z, &names).unwrap();
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![1.0, f64::from(t[i]), z[(i, 0)], z[(i, 1)]]).collect();
        prop_assert!((est.ate - normal_equations(&rows, &y)[1]).abs() <= 1e-10);
        let mut moved = z.clone();
        for i in 0..n {
            moved[(i, 1)] = scale * z[(i, 1)] + offset;
        }
        let est2 = ate_ols(&y, &t, &moved, &names).unwrap();
        prop_assert!((est.ate - est2.ate).abs() <= 1e-9);
        prop_assert!((est.ci_hi - est2.ci_hi).abs() <= 1e-8);
    }

    #[test]
    fn exact_twins_give_the_gap(pairs in 3usize..15, gap in -4.0f64..4.0) {
        let z = DMatrix::from_fn(2 * pairs, 1, |i, _| (i / 2) as f64 * 1.7);
        let t: Vec<u8> = (0..2 * pairs).map(|i| (i % 2) as u8).collect();
        let y: Vec<f64> = (0..2 * pairs).map(|i| z[(i, 0)].cos() + gap * f64::from(t[i])).collect();
        let e = ate_matching(&y, &t, &z, 1, &BOOT).unwrap();
        prop_assert!((e.ate - gap).abs() <= 1e-12);
    }

    #[test]
    fn hajek_is_invariant_to_unit_order(t in groups(), s in 0u64..100) {
        let mut r = Normals::new(s);
        let y: Vec<f64> = (0..t.len()).map(|_| r.next()).collect();
        let e: Vec<f64> = (0..t.len()).map(|i| 0.1 + 0.8 * ((i as f64 * 0.61).sin() + 1.0) / 2.0).collect();
        let fwd = hajek(&y, &t, &e, 0..t.len());
        let back = hajek(&y, &t, &e, (0..t.len()).rev());
        prop_assert!((fwd - back).abs() <= 1e-12);
    }

    #[test]
    fn trimming_is_idempotent_and_keeps_exactly_the_band(scores in prop::collection::vec(0.0f64..=1.0, 4..60), lo in 0.0f64..0.5, width in 0.1f64..0.5) {
        let hi = (lo + width).min(1.0);
        let report = PropensityReport {
            units: scores.iter().enumerate().map(|(i, &s)| PropensityUnit {
                index: i,
                id: i.to_string(),
                group: if i % 2 == 0 { Group::Treated } else { Group::ReliableControl },
                score: s,
                retained: true,
            }).collect(),
            bounds: None,
            warnings: vec![],
        };
        let cfg = TrimConfig::new(lo, hi).unwrap();
        if let Ok(once) = trim(&report, &cfg) {
            prop_assert!(once.units.iter().all(|u| u.retained == (lo <= u.score && u.score <= hi)));
            prop_assert_eq!(trim(&once, &cfg).unwrap(), once.clone());
            let bins = overlap_histogram(&once, 7).unwrap();
            prop_assert_eq!(bins.len(), 14);
            let (nt, nc) = once.group_sizes();
            let ht: usize = bins.iter().filter(|b| b.group == Group::Treated).map(|b| b.count).sum();
            let hc: usize = bins.iter().filter(|b| b.group == Group::ReliableControl).map(|b| b.count).sum();
            prop_assert_eq!((ht, hc), (nt, nc));
        }
    }

    #[test]
    fn precision_and_contamination_sum_to_one(tp in 0u64..500, fp in 0u64..500, fn_ in 0u64..500, tn in 0u64..500) {
        let c = ConfusionCounts::new(tp, fp, fn_, tn);
        let (p, k) = (c.control_precision(), c.contamination_rate());
        if tp + fp > 0 {
            prop_assert_eq!(p.num + k.num, p.den);
            for m in [c.control_recall(), p, k, c.treated_leakage()] {
                if let Some(v) = m.value() {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
        } else {
            prop_assert!(p.value().is_none() && k.value().is_none());
        }
    }

    #[test]
    fn quantile_is_monotone(values in prop::collection::vec(-100.0f64..100.0, 1..50), q1 in 0.0f64..=1.0, q2 in 0.0f64..=1.0) {
        let (a, b) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
        prop_assert!(quantile(&values, a) <= quantile(&values, b));
    }

    #[test]
    fn standardization_round_trips(seed in 0u64..500) {
        let mut r = Normals::new(seed);
        let m = DMatrix::from_fn(12, 3, |_, j| r.next() * (j as f64 + 1.0) + j as f64 * 10.0);
        let p = StandardizationParams::fit(&["a", "b", "c"], &m).unwrap();
        let back = p.inverse(&p.transform(&m));
        prop_assert!((back - &m).amax() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn pu_split_partitions_units_and_never_leaks_positives(seed in 0u64..10_000, hide in 0.1f64..0.6, linear in any::<bool>(), isvm in any::<bool>()) {
        let kind = if linear { SimKind::Linear } else { SimKind::Nonlinear };
        let d = generate(&SimConfig::new(kind, 200, seed)).unwrap();
        let pu = engineer_pu(&d, hide, seed + 1).unwrap();
        let cfg = PuConfig {
            method: if isvm { PuMethod::SpyIsvm } else { PuMethod::Spy },
            spy: SpyConfig { seed, ..SpyConfig::default() },
            ..PuConfig::default()
        };
        let split = match run_pu_pipeline(&pu, &cfg) {
            Ok(s) => s,
            Err(pucausal::Error::Precondition(_)) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        prop_assert_eq!(split.n_units(), pu.n_units());
        prop_assert_eq!(split.positives().len() + split.reliable_controls().len() + split.remaining_unlabeled().len(), pu.n_units());
        for i in 0..pu.n_units() {
            prop_assert_eq!(pu.s[i] == 1, split.assignments[i] == Assignment::Positive);
        }
        prop_assert!(split.reliable_trace.windows(2).all(|w| w[0] <= w[1]));
        let c = confusion(&split, pu.hidden_truth.as_ref().unwrap()).unwrap();
        prop_assert_eq!((c.tp + c.fp + c.fn_ + c.tn) as usize, pu.unlabeled().len());
    }

    #[test]
    fn spy_threshold_grows_with_the_quantile(seed in 0u64..10_000) {
        let d = generate(&SimConfig::new(SimKind::Linear, 200, seed)).unwrap();
        let pu = engineer_pu(&d, 0.3, seed).unwrap();
        let mut last = (f64::NEG_INFINITY, 0usize);
        for q in [0.0, 0.1, 0.25, 0.5, 0.9] {
            let s = spy_step(&pu, FeatureSet::Full, &SpyConfig { threshold_quantile: q, seed, ..SpyConfig::default() }, true).unwrap();
            let now = (s.threshold.unwrap(), s.reliable_controls().len());
            prop_assert!(now.0 >= last.0 && now.1 >= last.1);
            last = now;
        }
    }
}

#[test]
fn recall_grows_with_the_reliable_set() {
    let d = generate(&SimConfig::new(SimKind::Linear, 300, 4)).unwrap();
    let pu = engineer_pu(&d, 0.3, 4).unwrap();
    let truth = pu.hidden_truth.clone().unwrap();
    let mut last = 0.0;
    for q in [0.0, 0.2, 0.5, 0.8] {
        let s = spy_step(&pu, FeatureSet::Full, &SpyConfig { threshold_quantile: q, seed: 4, ..SpyConfig::default() }, true).unwrap();
        let r = confusion(&s, &truth).unwrap().control_recall().value().unwrap();
        assert!(r >= last);
        last = r;
    }
}

#[test]
fn final_svm_places_reliable_controls_on_the_control_side_when_separable() {
    // two well separated blobs, with a clean seed set of true controls
    let mut r = Normals::new(77);
    let n = 80;
    let x = DMatrix::from_fn(n, 2, |i, _| r.next() * 0.3 + if i < 40 { 3.0 } else { -3.0 });
    let s: Vec<u8> = (0..n).map(|i| u8::from(i < 20)).collect();
    let ids: Vec<String> = (0..n).map(|i| i.to_string()).collect();
    let names = vec!["a".to_string(), "b".to_string()];
    let mut initial = pucausal::pulearn::spy_select(&x, &s, &ids, &names, &SpyConfig::default()).unwrap();
    for i in 0..n {
        if initial.assignments[i] == Assignment::ReliableControl && i < 40 {
            initial.assignments[i] = Assignment::Unlabeled;
        }
    }
    let split = isvm_refine(&x, &initial, &SvmConfig::default(), 100).unwrap();
    let svm = split.svm.as_ref().unwrap();
    for i in split.reliable_controls() {
        let row: Vec<f64> = x.row(i).iter().copied().collect();
        assert!(svm.decision(&row) < 0.0, "unit {i}");
    }
    assert_eq!(split.reliable_controls(), (40..80).collect::<Vec<_>>());
    assert_eq!(split.isvm_converged, Some(true));
}

#[test]
fn standardize_uses_only_plain_features() {
    let d = generate(&SimConfig::new(SimKind::Linear, 50, 1)).unwrap();
    let (scaled, params) = standardize(&d).unwrap();
    let names: Vec<&str> = params.columns.iter().map(|c| c.name.as_str()).collect();
    assert!(!names.contains(&"t") && !names.contains(&"y"));
    assert_eq!(scaled.values("y").unwrap(), d.values("y").unwrap());
}
