use std::collections::BTreeMap;

use gplb_harness::report::{RiskRow, SCHEMA_VERSION};
use gplb_harness::{ExperimentConfig, HarnessError, RiskReport};
use proptest::prelude::*;

fn row(exact: f64, bound: f64, floor: Option<f64>, n: f64) -> RiskRow {
    RiskRow {
        d: 1,
        n,
        k: 4,
        m: 4,
        spectrum_id: "poly(tau=1,alpha=1)".into(),
        basis_len: 128,
        exact_risk: exact,
        mc_risk: Some(exact * 1.01),
        mc_stderr: Some(1e-6),
        lemma4_bound: bound,
        thm2_floor: floor,
        contraction_prob: None,
        radius: None,
        slope: Some(-0.7),
        seed: 3,
        extras: BTreeMap::new(),
    }
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![any::<f64>().prop_filter("finite", |v| v.is_finite()), -1e3f64..1e3]
}

fn opt() -> impl Strategy<Value = Option<f64>> {
    prop::option::of(finite())
}

prop_compose! {
    fn arb_row()(
        d in 1u32..5, n in finite(), k in any::<u64>(), m in any::<u64>(), id in "[a-z(),=.;\"]{0,12}",
        basis_len in any::<u64>(), exact in finite(), mc in opt(), se in opt(), bound in finite(),
        floor in opt(), prob in opt(), radius in opt(), slope in opt(), seed in any::<u64>(),
    ) -> RiskRow {
        RiskRow {
            d, n, k, m, spectrum_id: id, basis_len, exact_risk: exact, mc_risk: mc, mc_stderr: se,
            lemma4_bound: bound, thm2_floor: floor, contraction_prob: prob, radius, slope, seed,
            extras: BTreeMap::new(),
        }
    }
}

proptest! {
    #[test]
    fn csv_round_trip_is_exact(rows in prop::collection::vec(arb_row(), 0..6)) {
        let report = RiskReport { config: ExperimentConfig::default(), rows };
        let text = report.to_csv_string().unwrap();
        let back = RiskReport::read_csv(text.as_bytes()).unwrap();
        prop_assert_eq!(back, report.rows);
    }

    #[test]
    fn json_round_trip_is_exact(rows in prop::collection::vec(arb_row(), 0..6)) {
        let report = RiskReport { config: ExperimentConfig::default(), rows };
        let mut buf = Vec::new();
        report.write_json(&mut buf).unwrap();
        prop_assert_eq!(RiskReport::read_json(&buf[..]).unwrap(), report);
    }
}

#[test]
fn empty_report_encodings() {
    let report = RiskReport::new(ExperimentConfig::default());
    let csv = report.to_csv_string().unwrap();
    assert_eq!(csv.lines().count(), 1);
    assert!(RiskReport::read_csv(csv.as_bytes()).unwrap().is_empty());
    let mut buf = Vec::new();
    report.write_json(&mut buf).unwrap();
    let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
    assert_eq!(v["rows"], serde_json::json!([]));
    assert_eq!(RiskReport::read_json(&buf[..]).unwrap(), report);
}

#[test]
fn schema_mismatch_is_a_versioned_error() {
    let report = RiskReport::new(ExperimentConfig::default());
    let mut buf = Vec::new();
    report.write_json(&mut buf).unwrap();
    let mut v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
    v["schema_version"] = serde_json::json!(SCHEMA_VERSION + 1);
    let err = RiskReport::read_json(v.to_string().as_bytes()).unwrap_err();
    match &err {
        HarnessError::SchemaVersion { found, expected } => {
            assert_eq!((*found, *expected), (SCHEMA_VERSION + 1, SCHEMA_VERSION));
        }
        other => panic!("unexpected error {other:?}"),
    }
    assert!(err.to_string().contains("version 2"));
}

#[test]
fn malformed_csv_is_rejected() {
    assert!(matches!(
        RiskReport::read_csv("a,b\n1,2\n".as_bytes()),
        Err(HarnessError::Malformed(_))
    ));
    let report = RiskReport {
        config: ExperimentConfig::default(),
        rows: vec![row(1.0, 0.5, None, 10.0)],
    };
    let text = report.to_csv_string().unwrap().replace("1.0000000000000000e0", "one");
    assert!(matches!(
        RiskReport::read_csv(text.as_bytes()),
        Err(HarnessError::Malformed(_))
    ));
}

#[test]
fn bound_violations_respect_tolerance_and_floor_threshold() {
    let report = RiskReport {
        config: ExperimentConfig::default(),
        rows: vec![
            row(1.0, 1.0 + 5e-13, Some(0.5), 100.0),
            row(1.0, 1.0 + 1e-9, Some(0.5), 100.0),
            // the floor is claimed only from n = 2 (d+2)! = 12 on
            row(1.0, 0.5, Some(2.0), 11.0),
            row(1.0, 0.5, Some(2.0), 12.0),
        ],
    };
    let v = report.bound_violations();
    assert_eq!(v.len(), 2);
    assert_eq!((v[0].row, v[0].column), (1, "lemma4_bound"));
    assert_eq!((v[1].row, v[1].column), (3, "thm2_floor"));
}
