use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use singhyp::certifier::certify_detailed;
use singhyp::io::{read_csv, to_json_string, write_adaptedness_csv, write_delta_csv, write_splitting_csv};
use singhyp::rng::SeedStream;
use singhyp::splitting::{build_adapted_metric, verify_adaptedness, PowerConfig};
use singhyp::{
    certify, integrate_cocycle, make_system, CertifyConfig, CriterionId, QuadFormField, SamplingPlan,
    SplittingEstimate, Verdict,
};

fn diag_plan() -> SamplingPlan {
    SamplingPlan {
        initial_conditions: vec![vec![0.0, 1e-3, 1e-3]],
        transient: 0.0,
        horizon: 5.0,
        step: 1e-2,
        stride: 10,
        singularities: vec![vec![0.0; 3]],
    }
}

fn diag_system(d: [f64; 3]) -> singhyp::VectorFieldModel {
    let params: BTreeMap<String, f64> = d.iter().enumerate().map(|(i, v)| (format!("d{}", i + 1), *v)).collect();
    make_system("diag_linear", &params).unwrap()
}

#[test]
fn certificate_json_is_deterministic_and_round_trips() {
    let model = diag_system([-2.0, 1.0, -0.5]);
    let field = QuadFormField::standard(3);
    let cfg = CertifyConfig::default();
    let a = certify(&model, &field, &diag_plan(), &cfg).unwrap();
    let b = certify(&model, &field, &diag_plan(), &cfg).unwrap();
    let ja = to_json_string(&a).unwrap();
    assert_eq!(ja, to_json_string(&b).unwrap());
    assert_eq!(a.verdict, Verdict::CertifiedEvidence);

    let v: serde_json::Value = serde_json::from_str(&ja).unwrap();
    assert_eq!(v["verdict"], "certified-singular-hyperbolic-evidence");
    assert_eq!(v["version"], singhyp::VERSION);
    let b_entry = v["criteria"].as_array().unwrap().iter().find(|c| c["id"] == "b").unwrap();
    assert_eq!(b_entry["margin"].as_f64().unwrap(), a.single(CriterionId::B).unwrap().margin);
}

#[test]
fn delta_series_csv_matches_closed_form() {
    let model = diag_system([-2.0, 1.0, -0.5]);
    let run = certify_detailed(&model, &QuadFormField::standard(3), &diag_plan(), &CertifyConfig::default()).unwrap();
    let series = run.series[0][0].as_ref().unwrap();
    let mut buf = Vec::new();
    write_delta_csv(&mut buf, series).unwrap();
    let table = read_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
    assert_eq!(table.header, ["t", "delta", "delta_k", "mineig_hatJ"]);
    assert_eq!(table.column("delta").unwrap(), series.delta);
    // Ĵ = 2·diag(d2+d3, −d1−d3, −d1−d2) = diag(1, 5, 2).
    for m in table.column("mineig_hatJ").unwrap() {
        assert!((m - 1.0).abs() < 1e-12);
    }
    // δ stays inside (2·d1, 2·min(d2, d3)) = (−4, −1) for every policy.
    for row in &table.rows {
        assert!(row[1] > -4.0 && row[1] < -1.0);
        assert!((row[1] + row[2] - 2.0 * -1.5).abs() < 1e-12);
    }
}

#[test]
fn refuted_system_reports_failing_sample() {
    let model = diag_system([-2.0, 1.0, -1.5]);
    let c = certify(&model, &QuadFormField::standard(3), &diag_plan(), &CertifyConfig::default()).unwrap();
    assert_eq!(c.verdict, Verdict::RefutedAtSample);
    assert_eq!(c.verdict.exit_code(), 3);
    let b = c.single(CriterionId::B).unwrap();
    assert!(!b.pass);
    assert!(b.worst_sample.is_some());
}

#[test]
fn adapted_metric_pipeline_on_linear_system() {
    let model = diag_system([-2.0, 1.0, 1.0]);
    let s = integrate_cocycle(&model, &DVector::from_row_slice(&[0.0, 0.4, -0.3]), 20.0, 1e-2).unwrap();
    let mut rng = SeedStream::new(3).stream(singhyp::rng::streams::SPLITTING_START);
    // Gap 3 between the bundles: a window of 8 brings the angle error to ~e^{-24}.
    let cfg = PowerConfig { window: 8.0, ..PowerConfig::default() };
    let est = SplittingEstimate::estimate(&s, &cfg, &mut rng).unwrap();
    let metric = build_adapted_metric(&est, &QuadFormField::standard(3), &model).unwrap();
    let grid: Vec<f64> = (1..=10).map(|i| 0.2 * i as f64).collect();
    let report = verify_adaptedness(&metric, &s, &grid, 20).unwrap();
    assert!(report.pass);
    assert!((report.lambda - 2.0).abs() < 1e-3);

    let mut buf = Vec::new();
    write_adaptedness_csv(&mut buf, &report).unwrap();
    let table = read_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
    assert_eq!(table.rows.len(), grid.len());
    for (t, g) in table.column("t").unwrap().iter().zip(&grid) {
        assert!((t - g).abs() < 1e-12);
    }

    let mut buf = Vec::new();
    write_splitting_csv(&mut buf, &est).unwrap();
    let table = read_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
    assert_eq!(table.header.len(), 1 + 3 + 3 + 6);
    let e1 = table.column("e1").unwrap();
    assert!(e1.iter().all(|v| (v.abs() - 1.0).abs() < 1e-8));
    let f = DMatrix::from_row_slice(2, 3, &table.rows[0][7..13]).transpose();
    assert!(f.row(0).amax() < 1e-8);
}
