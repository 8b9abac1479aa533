use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn singhyp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_singhyp")).args(args).output().expect("binary runs")
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn identities_exit_zero_with_summary() {
    let out = singhyp(&["identities", "--dim", "4", "--trials", "200", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["multiplicativity", "determinant_power", "cofactor", "generator"] {
        assert!(text.contains(&format!("{name}: max error")), "{text}");
    }
}

#[test]
fn identities_report_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(singhyp(&["identities", "--dim", "3", "--trials", "20", "--seed", "5", "--out", arg(&a), "--quiet"]).status.code(), Some(0));
    assert_eq!(singhyp(&["identities", "--dim", "3", "--trials", "20", "--seed", "5", "--out", arg(&b), "--quiet"]).status.code(), Some(0));
    assert_eq!(fs::read(a.join("identities.json")).unwrap(), fs::read(b.join("identities.json")).unwrap());
}

#[test]
fn certified_and_refuted_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = singhyp(&["certify", arg(&config("diag-example.json")), "--out", arg(dir.path()), "--quiet"]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(ok.stdout.is_empty());
    let cert: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("certificate.json")).unwrap()).unwrap();
    assert_eq!(cert["verdict"], "certified-singular-hyperbolic-evidence");
    assert_eq!(cert["config_digest"].as_str().unwrap().len(), 64);

    let fail = singhyp(&["certify", "--config", arg(&config("diag-fail.json")), "--out", arg(dir.path()), "--quiet"]);
    assert_eq!(fail.status.code(), Some(3));
    let cert: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("certificate.json")).unwrap()).unwrap();
    assert_eq!(cert["verdict"], "refuted-at-sample");
}

#[test]
fn reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    // The output directory is part of the echoed config, so both runs use
    // the same one.
    let target = dir.path().join("run");
    let runs = [dir.path().join("first"), target.clone()];
    for i in 0..2 {
        let out = singhyp(&["metric", arg(&config("diag-example.json")), "--out", arg(&target), "--seed", "11", "--quiet"]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        if i == 0 {
            fs::rename(&target, &runs[0]).unwrap();
        }
    }
    let mut names: Vec<_> = fs::read_dir(&runs[0]).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 6, "{names:?}");
    for n in &names {
        assert_eq!(fs::read(runs[0].join(n)).unwrap(), fs::read(runs[1].join(n)).unwrap(), "{n:?}");
    }
    let cert: serde_json::Value = serde_json::from_slice(&fs::read(runs[0].join("certificate.json")).unwrap()).unwrap();
    assert_eq!(cert["seed"], 11);
    assert!(cert["adapted_metric"]["pass"].as_bool().unwrap());
}

#[test]
fn policy_flag_restricts_criteria() {
    let dir = tempfile::tempdir().unwrap();
    let out = singhyp(&["certify", arg(&config("diag-example.json")), "--out", arg(dir.path()), "--policy", "midpoint", "--quiet"]);
    assert_eq!(out.status.code(), Some(0));
    let cert: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("certificate.json")).unwrap()).unwrap();
    let policies: Vec<&str> = cert["criteria"].as_array().unwrap().iter().filter_map(|c| c["policy"].as_str()).collect();
    assert!(!policies.is_empty());
    assert!(policies.iter().all(|p| *p == "midpoint"));
    assert!(dir.path().join("delta_midpoint_0.csv").exists());
    assert!(!dir.path().join("delta_sup_0.csv").exists());
}

#[test]
fn orbit_writes_cocycle_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = singhyp(&["orbit", arg(&config("diag-example.json")), "--out", arg(dir.path()), "--quiet"]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("cocycle_0.csv")).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(header, "t,x1,x2,x3,a11,a12,a13,a21,a22,a23,a31,a32,a33");
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = singhyp(&["certify"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("config"));

    assert_eq!(singhyp(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(singhyp(&["certify", "/nonexistent.json"]).status.code(), Some(1));

    let bad = dir.path().join("bad.json");
    let text = fs::read_to_string(config("diag-example.json")).unwrap().replace("\"step\": 0.01", "\"step\": 0").replace("diag_linear", "duffing");
    fs::write(&bad, text).unwrap();
    let out = singhyp(&["certify", arg(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("step") && err.contains("duffing") && err.contains("lorenz"), "{err}");
}
