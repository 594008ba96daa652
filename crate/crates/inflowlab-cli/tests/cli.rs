use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn inflowlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_inflowlab"))
        .args(args)
        .arg("--quiet")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL: &str = r#""domain": {"Nx": 8, "Ny": 4, "Nz": 4}, "time": {"T": 0.4, "ode_step": 0.02, "snapshot_times": [0.2, 0.4]}"#;

fn config(scenario: &str) -> String {
    format!("{{{SMALL}, \"scenario\": {scenario}, \"seed\": 7}}")
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn run(dir: &Path, cfg: &str, extra: &[&str]) -> Output {
    let c = write_config(dir, cfg);
    let out = dir.join("out");
    let mut args = vec!["run", "--config", &c, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    inflowlab(&args)
}

#[test]
fn zero_preset_passes_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &config(r#"{"preset": "zero"}"#), &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    assert!(out.join("history.csv").is_file());
    assert!(out.join("snapshots").is_dir());
    let r = read_json(&out.join("report.json"));
    assert_eq!(r["pass"], true);
    assert_eq!(r["schema"], "inflowlab.report/1");
}

#[test]
fn negative_ode_step_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_config(dir.path(), &config(r#"{"preset": "zero"}"#));
    let o = inflowlab(&["run", "--config", &c, "--override", "time.ode_step=-0.1"]);
    assert_eq!(code(&o), 2);
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "config");
    assert!(err["message"].as_str().unwrap().contains("ode_step"));
}

#[test]
fn reversed_inflow_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &config(r#"{"preset": "uniform", "params": {"speed": -1}}"#), &[]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("inflow sign"));
}

const MISMATCH: &str = r#"{"preset": "uniform", "expressions": {"h": ["1", "0", "0.5"]}}"#;

#[test]
fn incompatible_data_fail_unless_a_jump_is_expected() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(dir.path(), &config(MISMATCH), &[])), 1);
    let o = run(dir.path(), &config(MISMATCH), &["--expect-jump"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&dir.path().join("out/report.json"));
    assert!(r["jump"].is_object());
    assert_eq!(code(&inflowlab(&["report", "--out", dir.path().join("out").to_str().unwrap()])), 0);
}

#[test]
fn verify_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(r#"{"preset": "shear"}"#);
    assert_eq!(code(&run(dir.path(), &cfg, &[])), 0);
    let c = dir.path().join("config.json");
    let out = dir.path().join("out");
    let o = inflowlab(&["verify", "--config", c.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let a = read_json(&out.join("report.json"));
    let b = read_json(&out.join("verify.json"));
    assert_eq!(a["checks"], b["checks"]);
    assert_eq!(a["compat"], b["compat"]);
}

#[test]
fn identical_runs_are_bitwise_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = config(r#"{"preset": "swirl"}"#);
    run(a.path(), &cfg, &[]);
    run(b.path(), &cfg, &[]);
    let ra = std::fs::read(a.path().join("out/report.json")).unwrap();
    let rb = std::fs::read(b.path().join("out/report.json")).unwrap();
    assert_eq!(ra, rb);
    assert_eq!(code(&inflowlab(&["report", "--out", a.path().join("out").to_str().unwrap()])), 0);
}

#[test]
fn corrupted_snapshot_is_a_format_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(dir.path(), &config(r#"{"preset": "zero"}"#), &[])), 0);
    let out = dir.path().join("out");
    let snap = std::fs::read_dir(out.join("snapshots"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|e| e == "bin"))
        .unwrap();
    let bytes = std::fs::read(&snap).unwrap();
    std::fs::write(&snap, &bytes[..bytes.len() - 5]).unwrap();
    let c = dir.path().join("config.json");
    let o = inflowlab(&["verify", "--config", c.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(out.join("error.json").is_file());
}

#[test]
fn report_needs_a_report() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&inflowlab(&["report", "--out", dir.path().to_str().unwrap()])), 2);
}

#[test]
fn report_renders_text_and_table() {
    let dir = tempfile::tempdir().unwrap();
    run(dir.path(), &config(r#"{"preset": "zero"}"#), &[]);
    let out = dir.path().join("out");
    assert_eq!(code(&inflowlab(&["report", "--out", out.to_str().unwrap()])), 0);
    let table = std::fs::read_to_string(out.join("history.dat")).unwrap();
    assert!(table.starts_with("# t div_sup"));
    assert!(out.join("report.txt").is_file());
}

#[test]
fn manufacture_writes_the_data() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_config(dir.path(), &config(r#"{"preset": "manufactured"}"#));
    let out = dir.path().join("m");
    let o = inflowlab(&["manufacture", "--config", &c, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("data/y0.bin").is_file());
    assert!(out.join("data/data.json").is_file());
}
