use std::path::Path;
use std::process::{Command, Output};

use gls_core::averaging::BoundReport;
use gls_core::tailfun::{CurveTail, SharedTail};
use serde_json::Value;
use tempfile::TempDir;

fn gls(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gls"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("GLS_SEED")
        .env_remove("GLS_SAMPLES")
        .env_remove("GLS_CONFIG")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<f64>> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

fn write_report(dir: &Path, name: &str, value: f64) -> std::path::PathBuf {
    let curve: SharedTail = std::sync::Arc::new(CurveTail::new("flat", move |_| value));
    let report = BoundReport::new("flat", curve, Vec::new(), 0.01, vec!["flat".into()]).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, report.to_json().unwrap()).unwrap();
    path
}

#[test]
fn doob_transform_of_subgaussian_psi_at_two() {
    let dir = TempDir::new().unwrap();
    let o = gls(dir.path(), &["transform", "doob", "--psi", "psiML:m=2", "--at", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&dir.path().join("psi.csv"));
    assert_eq!(rows.len(), 1);
    assert!((rows[0][1] - 2.0 * 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn manifest_echoes_the_effective_configuration() {
    let dir = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_gls"))
        .args(["natural", "--tail", "exponential", "--grid", "12", "--out"])
        .arg(dir.path())
        .env("GLS_SEED", "77")
        .env_remove("GLS_CONFIG")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = read_json(&dir.path().join("manifest.json"));
    assert_eq!(m["schema_version"], 1);
    assert_eq!(m["effective"]["seed"], 77);
    assert_eq!(m["effective"]["grid"], 12);
    assert_eq!(m["effective"]["samples"], 100_000);
    assert_eq!(m["command"]["command"], "natural");
    assert!(m["outputs"].as_array().unwrap().iter().any(|f| f == "psi.csv"));
}

#[test]
fn config_file_fills_unset_flags() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"schema_version": 1, "seed": 5, "grid": 20}"#).unwrap();
    let out = dir.path().join("run");
    let o = gls(&out, &["--config", cfg.to_str().unwrap(), "--grid", "30", "natural", "--tail", "gaussian"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = read_json(&out.join("manifest.json"));
    assert_eq!(m["effective"]["seed"], 5);
    assert_eq!(m["effective"]["grid"], 30);
}

#[test]
fn bad_configuration_is_a_parse_error() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"schema_version": 2}"#).unwrap();
    assert_eq!(code(&gls(dir.path(), &["--config", cfg.to_str().unwrap(), "natural", "--tail", "gaussian"])), 2);
    std::fs::write(&cfg, r#"{"schema_version": 1, "sed": 3}"#).unwrap();
    assert_eq!(code(&gls(dir.path(), &["--config", cfg.to_str().unwrap(), "natural", "--tail", "gaussian"])), 2);
    assert_eq!(code(&gls(dir.path(), &["--samples", "10", "natural", "--tail", "gaussian"])), 2);
}

#[test]
fn exit_codes_follow_the_error_class() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    assert_eq!(code(&gls(d, &["natural", "--tail", "nonsense:x=1"])), 2);
    assert_eq!(code(&gls(d, &["bound", "weak", "--tail", "pareto:c=4,q=2", "--q", "2"])), 3);
    assert_eq!(code(&gls(d, &["verify", "--report", "/nonexistent.json", "--sim", "/nonexistent.csv"])), 3);
    // no moment of order above 1 exists
    assert_eq!(code(&gls(d, &["bound", "average", "--tail", "pareto:q=0.5"])), 4);
    // a domain hugging p = 1 still yields a report
    assert_eq!(code(&gls(d, &["bound", "average", "--tail", "pareto:q=1.0001"])), 0);
}

#[test]
fn verify_passes_the_unit_bound_and_fails_the_zero_bound() {
    let dir = TempDir::new().unwrap();
    let sim = dir.path().join("sim");
    let o = gls(&sim, &["--samples", "10000", "simulate", "field", "--tail", "exponential"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let samples = sim.join("samples.csv");

    let one = write_report(dir.path(), "one.json", 1.0);
    let out = dir.path().join("v1");
    let o = gls(&out, &["verify", "--report", one.to_str().unwrap(), "--sim", samples.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read_json(&out.join("verdict.json"))["verdict"], "PASS");

    let zero = write_report(dir.path(), "zero.json", 0.0);
    let out = dir.path().join("v0");
    let o = gls(&out, &["verify", "--report", zero.to_str().unwrap(), "--sim", samples.to_str().unwrap()]);
    assert_eq!(code(&o), 5);
    assert_eq!(read_json(&out.join("verdict.json"))["verdict"], "FAIL");
}

#[test]
fn bound_reports_round_trip_through_disk() {
    let dir = TempDir::new().unwrap();
    let o = gls(dir.path(), &["bound", "average", "--tail", "weibull-log:m=2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let files: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    let json = files.iter().find(|f| f.ends_with(".json") && *f != "manifest.json").unwrap();
    let report = BoundReport::from_json(&std::fs::read_to_string(dir.path().join(json)).unwrap()).unwrap();
    assert_eq!(report.validity_from(), std::f64::consts::E);
    assert!(report.table().iter().all(|(_, v)| (0.0..=1.0).contains(v)));
}

#[test]
fn example_three_three_demo_reports_exact_values() {
    let dir = TempDir::new().unwrap();
    let o = gls(dir.path(), &["--samples", "200000", "demo", "example-3.3", "--alpha", "0.5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("PASS") && !stdout.contains("FAIL"), "{stdout}");
    let checks = std::fs::read_to_string(dir.path().join("example-3.3/checks.json")).unwrap();
    assert!(checks.contains("2.828427"), "{checks}");
    assert!(checks.contains("1.171572"), "{checks}");
}
