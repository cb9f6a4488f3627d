use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn cqsm(cmd: &str, config: &str, dir: &Path) -> Output {
    let cfg = dir.join("config.json");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_cqsm"))
        .args([cmd, "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn result(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("out/result.json")).unwrap()).unwrap()
}

#[test]
fn even_n_is_a_validation_error() {
    let d = TempDir::new().unwrap();
    let out = cqsm("solve", r#"{"grid": {"half_width": 3.0, "n": 8}}"#, d.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n must be odd"));
}

#[test]
fn zero_in_eps_list_is_rejected() {
    let d = TempDir::new().unwrap();
    let out = cqsm("eps-scan", r#"{"eps_list": [1.0, 0.0]}"#, d.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("eps_list"));
}

#[test]
fn malformed_json_reports_the_line() {
    let d = TempDir::new().unwrap();
    let out = cqsm("solve", "{\n  \"grid\": {\n    \"n\": ,\n  }\n}", d.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn unknown_fields_are_rejected() {
    let d = TempDir::new().unwrap();
    let out = cqsm("solve", r#"{"grdi": {"n": 7}}"#, d.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_profile_table_is_rejected_at_parse_time() {
    let d = TempDir::new().unwrap();
    let out = cqsm("bound", r#"{"field": {"profile_csv": "nope.csv"}}"#, d.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.csv"));
}

#[test]
fn command_mismatch_is_recorded_as_validation_error() {
    let d = TempDir::new().unwrap();
    let out = cqsm("bound", r#"{"command": "solve"}"#, d.path());
    assert_eq!(out.status.code(), Some(2));
    let r = result(d.path());
    assert_eq!(r["error"]["kind"], "validation");
    assert_eq!(r["error"]["exit_code"], 2);
}

#[test]
fn free_field_solve_has_empty_gap_list() {
    let d = TempDir::new().unwrap();
    let cfg = r#"{
        "field": {"profile": {"kind": "amplitude_scaled", "base": {"kind": "exp_i", "r": 0.55}, "amplitude": 0.0}},
        "grid": {"half_width": 3.0, "n": 5}
    }"#;
    let out = cqsm("solve", cfg, d.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = result(d.path());
    assert_eq!(r["payload"]["spectrum"]["eigenvalues"], Value::Array(vec![]));
    assert_eq!(r["payload"]["n_h"], 0);
    assert!(r["error"].is_null());
    let csv = std::fs::read_to_string(d.path().join("out/eigenvalues.csv")).unwrap();
    assert_eq!(
        csv.trim(),
        "index,lambda,residual,sector_l,sector_s,sector_t,k3_variance"
    );
}

#[test]
fn defaults_are_echoed() {
    let d = TempDir::new().unwrap();
    let out = cqsm("bound", "{}", d.path());
    assert_eq!(out.status.code(), Some(0));
    let c = &result(d.path())["config"];
    assert_eq!(c["grid"]["n"], 31);
    assert_eq!(c["grid"]["half_width"], 8.0);
    assert_eq!(c["field"]["mass"], 1.0);
    assert_eq!(c["solver"]["tol"], 1e-8);
    assert_eq!(c["field"]["profile"]["kind"], "exp_i");
}

#[test]
fn repeated_runs_are_byte_identical() {
    let cfg = r#"{
        "field": {"profile": {"kind": "exp_i", "r": 0.55}},
        "grid": {"half_width": 3.0, "n": 5},
        "bound": {"mc_samples": 20000}
    }"#;
    for cmd in ["solve", "bound"] {
        let a = TempDir::new().unwrap();
        let b = TempDir::new().unwrap();
        assert_eq!(cqsm(cmd, cfg, a.path()).status.code(), Some(0));
        assert_eq!(cqsm(cmd, cfg, b.path()).status.code(), Some(0));
        let ra = std::fs::read(a.path().join("out/result.json")).unwrap();
        let rb = std::fs::read(b.path().join("out/result.json")).unwrap();
        assert_eq!(ra, rb, "{cmd}");
    }
}

#[test]
fn seed_override_enters_hash_and_sampling() {
    let d1 = TempDir::new().unwrap();
    let d2 = TempDir::new().unwrap();
    let cfg = r#"{"bound": {"mc_samples": 20000}}"#;
    cqsm("bound", cfg, d1.path());
    let cfg_path = d2.path().join("config.json");
    std::fs::write(&cfg_path, cfg).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_cqsm"))
        .args(["bound", "--seed", "99", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(d2.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let (r1, r2) = (result(d1.path()), result(d2.path()));
    assert_eq!(r2["config"]["seed"], 99);
    assert_ne!(r1["config_hash"], r2["config_hash"]);
    assert_ne!(
        r1["payload"]["monte_carlo"]["c_f"],
        r2["payload"]["monte_carlo"]["c_f"]
    );
}
