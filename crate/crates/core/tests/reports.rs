use std::fs;
use std::path::Path;
use std::process::Command;

use lrsense::experiments::report::{REPORT_FILE, REPORT_SCHEMA_JSON};
use serde_json::Value;

fn validator() -> jsonschema::Validator {
    let schema: Value = serde_json::from_str(REPORT_SCHEMA_JSON).unwrap();
    jsonschema::validator_for(&schema).unwrap()
}

fn lrsense(dir: &Path, args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_lrsense"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env("LRSENSE_WORKERS", "2")
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().unwrap_or(-1), text)
}

fn report(dir: &Path) -> Value {
    let text = fs::read_to_string(dir.join(REPORT_FILE)).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    let errors: Vec<String> = validator().iter_errors(&v).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "schema errors: {errors:?}");
    v
}

const SMALL: &[&str] = &["-s", "n=8", "-s", "m=120", "-s", "m_val=20", "-s", "gd.alpha=0.001"];

#[test]
fn demo_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["demo-overfit", "-s", "r_star=2", "-s", "gd.iterations=80"];
    args.extend_from_slice(SMALL);
    let (code, text) = lrsense(dir.path(), &args);
    assert!(code == 0 || code == 1, "{text}");
    for f in ["config.toml", "report.json", "trajectory.csv", "curves.png"] {
        assert!(dir.path().join(f).exists(), "missing {f}");
    }
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,train_loss,val_loss,recovery_error,sigma_min_signal,err_norm,alignment\n"));
    assert_eq!(csv.lines().count(), 82);
    let r = report(dir.path());
    assert_eq!(r["command"], "demo-overfit");
    assert_eq!(r["passed"].as_bool().unwrap(), code == 0);
    let defaults: Vec<&str> = r["defaults_used"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert!(defaults.contains(&"sigma2") && !defaults.contains(&"n"));

    // the snapshot replays to the same curves
    let again = tempfile::tempdir().unwrap();
    let snap = dir.path().join("config.toml");
    let (_, text) = lrsense(again.path(), &["demo-overfit", "--config", snap.to_str().unwrap()]);
    let csv2 = fs::read_to_string(again.path().join("trajectory.csv")).unwrap_or_else(|_| panic!("{text}"));
    assert_eq!(csv, csv2);
}

#[test]
fn noiseless_demo_has_no_assertions_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "demo-overfit",
        "--sigma2",
        "0",
        "-s",
        "gd.iterations=20",
        "-s",
        "phase_every=0",
    ];
    args.extend_from_slice(SMALL);
    let (code, text) = lrsense(dir.path(), &args);
    assert_eq!(code, 0, "{text}");
    assert!(report(dir.path())["assertions"].as_array().unwrap().is_empty());
}

#[test]
fn grid_report_validates() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "grid",
        "--trials",
        "2",
        "-s",
        "ranks=[1, 2, 3]",
        "-s",
        "sigma2=[0.05, 0.1, 0.2]",
        "-s",
        "gd.iterations=60",
    ];
    args.extend_from_slice(SMALL);
    let (code, text) = lrsense(dir.path(), &args);
    assert!(code == 0 || code == 1, "{text}");
    let r = report(dir.path());
    assert_eq!(r["result"]["cells"].as_array().unwrap().len(), 3);
    let trials = fs::read_to_string(dir.path().join("trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 1 + 3 * 3 * 2);
    assert!(trials.lines().nth(1).unwrap().starts_with("sensing,1,0,0.05,0,"));
    for f in [
        "heatmap_oracle.csv",
        "heatmap_selected.csv",
        "heatmap_oracle.png",
        "heatmap_selected.png",
    ] {
        assert!(dir.path().join(f).exists(), "missing {f}");
    }
}

#[test]
fn scaling_rejects_too_few_points() {
    let dir = tempfile::tempdir().unwrap();
    let (code, text) = lrsense(dir.path(), &["scaling", "-s", "values=[0.1, 0.2]"]);
    assert_eq!(code, 2);
    assert!(text.contains("insufficient"), "{text}");
}

#[test]
fn scaling_report_validates() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "scaling",
        "--axis",
        "sigma2",
        "-s",
        "r_star=2",
        "-s",
        "gd.iterations=60",
    ];
    args.extend_from_slice(&["-s", "n=8", "-s", "m=120", "-s", "gd.alpha=0.001"]);
    let (code, text) = lrsense(dir.path(), &args);
    assert!(code == 0 || code == 1, "{text}");
    let r = report(dir.path());
    assert_eq!(r["result"]["runs"].as_array().unwrap().len(), 40);
    assert!(dir.path().join("runs.csv").exists() && dir.path().join("scaling.png").exists());
}

#[test]
fn rip_probe_saves_and_reloads_operator() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "rip-probe",
        "-s",
        "n=10",
        "-s",
        "m=200",
        "-s",
        "trials=50",
        "--save-operator",
        "op.bin",
    ];
    let (code, text) = lrsense(dir.path(), &args);
    assert_eq!(code, 0, "{text}");
    let first = report(dir.path());
    let op = dir.path().join("op.bin");
    assert!(op.exists());

    let again = tempfile::tempdir().unwrap();
    let (code, text) = lrsense(
        again.path(),
        &["rip-probe", "-s", "trials=50", "--load-operator", op.to_str().unwrap()],
    );
    assert_eq!(code, 0, "{text}");
    let second = report(again.path());
    assert_eq!(first["result"]["levels"], second["result"]["levels"]);
    assert_eq!(second["result"]["n"], 10);
}

#[test]
fn bad_config_exits_with_error() {
    let dir = tempfile::tempdir().unwrap();
    let (code, text) = lrsense(dir.path(), &["grid", "-s", "no_such_key=1"]);
    assert_eq!(code, 2, "{text}");
}
