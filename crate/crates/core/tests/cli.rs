use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("gmeasure-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(dir: &Path, command: &str, config: &str, extra: &[&str]) -> Output {
    let cfg = dir.join("config.json");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_gmeasure"))
        .arg(command)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .output()
        .unwrap()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("out/report.json")).unwrap()).unwrap()
}

const TABLE1: &str = r#""g": {"kind": "binary_markov", "p11": 0.3, "p10": 0.6}"#;

#[test]
fn check_exit_codes_follow_status() {
    let dir = scratch("check");
    let holds = r#"{"schema": "gmeasure.config/1",
        "variations": {"kind": "power", "scale": 1.0, "exponent": 0.6},
        "check": {"condition": "square"}}"#;
    let out = run(&dir, "check", holds, &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = report(&dir);
    assert_eq!(rep["schema"], "gmeasure.report/1");
    assert_eq!(rep["result"]["verdict"]["status"], "holds_at_horizon");
    assert_eq!(rep["config_sha256"].as_str().unwrap().len(), 64);

    let fails = r#"{"schema": "gmeasure.config/1",
        "variations": {"kind": "power", "scale": 1.0, "exponent": 0.4},
        "check": {"condition": "square", "horizon": 100000}}"#;
    assert_eq!(run(&dir, "check", fails, &[]).status.code(), Some(1));
}

#[test]
fn invalid_config_names_the_field() {
    let dir = scratch("invalid");
    let bad = r#"{"schema": "gmeasure.config/1", "check": {"condition": "square", "horizon": "many"}}"#;
    let out = run(&dir, "check", bad, &[]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("check.horizon"));
    let out = Command::new(env!("CARGO_BIN_EXE_gmeasure")).arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    let out = Command::new(env!("CARGO_BIN_EXE_gmeasure")).arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn blocks_csv_layout() {
    let dir = scratch("blocks");
    let cfg = format!(
        r#"{{"schema": "gmeasure.config/1", {TABLE1},
        "blocks": {{"strategy": "unit", "levels": 5}},
        "rates": {{"source": "from_rho"}}}}"#
    );
    let out = run(&dir, "blocks", &cfg, &[]);
    assert_eq!(out.status.code(), Some(0));
    let mut rdr = csv::Reader::from_path(dir.join("out/blocks.csv")).unwrap();
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        ["ell", "B_ell", "b_ell", "s_ell", "r_ell", "delta_bar_prefix"]
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 5);
    let r1: f64 = rows[0][4].parse().unwrap();
    assert!((r1 + 0.7f64.ln()).abs() < 1e-15);
    assert!(dir.join("out/validity.csv").exists());
}

#[test]
fn couple_needs_seed_and_is_reproducible() {
    let dir = scratch("couple");
    let cfg = format!(
        r#"{{"schema": "gmeasure.config/1", {TABLE1},
        "g_other": {{"kind": "binary_markov", "p11": 0.306, "p10": 0.6079}},
        "blocks": {{"strategy": "unit", "levels": 10}},
        "rates": {{"source": "from_rho"}},
        "couple": {{"horizon": 2000, "trials": 8}}}}"#
    );
    assert_eq!(run(&dir, "couple", &cfg, &[]).status.code(), Some(3));
    let a = run(&dir, "couple", &cfg, &["--seed", "11"]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let csv_a = std::fs::read_to_string(dir.join("out/couple.csv")).unwrap();
    let b = run(&dir, "couple", &cfg, &["--seed", "11"]);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(csv_a, std::fs::read_to_string(dir.join("out/couple.csv")).unwrap());
    let rep = report(&dir);
    assert_eq!(rep["seed"], 11);
    assert_eq!(rep["trials"], 8);
}

#[test]
fn renewal_hellinger_iterate() {
    let dir = scratch("misc");
    let cfg = format!(
        r#"{{"schema": "gmeasure.config/1", {TABLE1}, "seed": 3,
        "blocks": {{"strategy": "unit", "levels": 1}},
        "rates": {{"source": "manual", "values": [0.6931471805599453]}},
        "renewal": {{"horizon": 50, "simulate_steps": 10000}},
        "hellinger": {{"max_start": 2, "max_b": 2}},
        "iterate": {{"steps": 20, "nu1": {{"point": [0]}}, "nu2": {{"point": [1]}}}}}}"#
    );
    assert_eq!(run(&dir, "renewal", &cfg, &[]).status.code(), Some(0));
    let rep = report(&dir);
    assert!((rep["result"]["limit"].as_f64().unwrap() - 1.5).abs() < 1e-12);
    assert_eq!(rep["seed"], 3);

    assert_eq!(run(&dir, "hellinger", &cfg, &[]).status.code(), Some(0));
    let text = std::fs::read_to_string(dir.join("out/hellinger.csv")).unwrap();
    assert!(text.starts_with("B,b,h,rho_exact,bound_log,bound_sqrt,bound_w,slack\n"));
    assert_eq!(text.lines().count(), 1 + 3 * 2);

    assert_eq!(run(&dir, "iterate", &cfg, &[]).status.code(), Some(0));
    let rep = report(&dir);
    assert!(rep["result"]["final_distance"].as_f64().unwrap() < 1e-3);
}
