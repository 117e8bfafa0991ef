use std::f64::consts::PI;
use std::process::{Command, Output};
use std::sync::OnceLock;

use serde_json::Value;

fn singheat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_singheat"))
        .args(args)
        .env_remove("SINGHEAT_CACHE_DIR")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn num(v: &Value) -> f64 {
    v.as_str().expect("decimal string").parse().expect("parses")
}

fn lambdas(v: &Value) -> Vec<f64> {
    v["modes"].as_array().unwrap().iter().map(|m| num(&m["lambda"])).collect()
}

#[test]
fn classical_spectrum_is_k_squared_pi_squared() {
    let v = json(&singheat(&["spectrum", "--mu", "0", "--K", "5"]));
    let l = lambdas(&v);
    assert_eq!(l.len(), 5);
    for (i, l) in l.iter().enumerate() {
        let k = (i + 1) as f64;
        assert!((l - k * k * PI * PI).abs() <= 1e-10, "lambda_{k} = {l}");
    }
}

#[test]
fn critical_mu_exits_with_validation_status() {
    let out = singheat(&["spectrum", "--mu", "0.3", "--K", "3"]);
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("mu < 1/4"), "{msg}");
    assert!(out.stdout.is_empty());
}

#[test]
fn oversized_family_is_a_validation_error() {
    let out = singheat(&["synthesize", "--mu", "0", "--T", "1", "--K", "31"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_horizon_is_a_validation_error() {
    let out = singheat(&["biortho", "--mu", "0", "--K", "3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--T"));
}

#[test]
fn unreachable_target_is_a_numerical_guard() {
    let out = singheat(&["synthesize", "--mu", "0", "--T", "10", "--K", "4", "--uT", "phi:4"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unreachable"));
}

#[test]
fn config_file_is_overlaid_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"mu": "0.2", "K": 2, "precision_bits": 128}"#).unwrap();
    let from_file = json(&singheat(&["spectrum", "--config", cfg.to_str().unwrap()]));
    assert_eq!(from_file["precision_bits"], 128);
    assert_eq!(lambdas(&from_file).len(), 2);
    let overridden = json(&singheat(&["spectrum", "--config", cfg.to_str().unwrap(), "--K", "4"]));
    assert_eq!(lambdas(&overridden).len(), 4);

    std::fs::write(&cfg, r#"{"mu": 0.2, "unknown": true}"#).unwrap();
    assert_eq!(singheat(&["spectrum", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn outputs_are_written_atomically_and_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(format!("{name}.json"));
        let csv = dir.path().join(format!("{name}.csv"));
        let o = singheat(&[
            "simulate", "--mu", "-1", "--T", "0.5", "--K", "4", "--u0", "modal:1,0,0.5",
            "--xgrid", "5", "--tgrid", "3",
            "--out", out.to_str().unwrap(), "--csv", csv.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(o.stdout.is_empty());
        (std::fs::read(out).unwrap(), std::fs::read(csv).unwrap())
    };
    let (j1, c1) = run("a");
    let (j2, c2) = run("b");
    assert_eq!(j1, j2);
    assert_eq!(c1, c2);
    let csv = String::from_utf8(c1).unwrap();
    let lines: Vec<&str> = csv.split("\r\n").filter(|l| !l.is_empty()).collect();
    assert_eq!(lines[0], "x,t,u");
    assert_eq!(lines.len(), 1 + 5 * 4);
    let v: Value = serde_json::from_slice(&j1).unwrap();
    assert!(num(&v["simulation"]["terminal_error_l2"]) < 1e-8);
}

#[test]
fn cache_changes_no_values() {
    let dir = tempfile::tempdir().unwrap();
    let cached = |_: ()| {
        Command::new(env!("CARGO_BIN_EXE_singheat"))
            .args(["spectrum", "--mu", "-0.5", "--K", "8"])
            .env("SINGHEAT_CACHE_DIR", dir.path())
            .output()
            .unwrap()
    };
    let fresh = lambdas(&json(&singheat(&["spectrum", "--mu", "-0.5", "--K", "8"])));
    let cold = lambdas(&json(&cached(())));
    assert!(dir.path().join("bessel_zeros.json").exists());
    let warm = lambdas(&json(&cached(())));
    for ((a, b), c) in fresh.iter().zip(&cold).zip(&warm) {
        assert!((a - b).abs() <= 1e-15 * a && (a - c).abs() <= 1e-15 * a);
    }
}

#[test]
fn transform_writes_degenerate_samples() {
    let out = singheat(&["transform", "--mu", "0.2", "--T", "1", "--K", "3", "--xgrid", "4", "--tgrid", "2"]);
    assert!(out.status.success());
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.starts_with("xi,t,phi\r\n"));
    assert_eq!(csv.matches("\r\n").count(), 1 + 4 * 3);
}

#[test]
fn poly_bubble_is_refused_for_sweeps() {
    let out = singheat(&["cost-sweep", "--mu-list", "-1,0", "--T", "1", "--K", "3", "--u0", "poly_bubble"]);
    assert_eq!(out.status.code(), Some(2));
}

/// The full suite is slow; both runs are shared by the tests below. The
/// second one also writes the JSON report.
fn verify_runs() -> &'static (Output, Output, Value) {
    static RUNS: OnceLock<(Output, Output, Value)> = OnceLock::new();
    RUNS.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("verify.json");
        let first = singheat(&["verify"]);
        let second = singheat(&["verify", "--out", path.to_str().unwrap()]);
        let report = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
        (first, second, report)
    })
}

#[test]
fn verify_is_byte_identical_with_at_least_forty_checks() {
    let (a, b, _) = verify_runs();
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8_lossy(&a.stdout);
    let checks = text.lines().filter(|l| l.starts_with("[PASS]") || l.starts_with("[FAIL]")).count();
    assert!(checks >= 40, "{checks} checks");
}

#[test]
fn verify_passes_on_a_fresh_checkout() {
    let (a, _, _) = verify_runs();
    let text = String::from_utf8_lossy(&a.stdout);
    let failing: Vec<&str> = text.lines().filter(|l| l.starts_with("[FAIL]")).collect();
    assert_eq!(a.status.code(), Some(0), "failing checks:\n{}", failing.join("\n"));
}

#[test]
fn verify_json_report_matches_matrix() {
    let (a, _, v) = verify_runs();
    let text = String::from_utf8_lossy(&a.stdout);
    let rows = text.lines().filter(|l| l.starts_with("[PASS]") || l.starts_with("[FAIL]")).count();
    assert_eq!(v["total"].as_u64().unwrap() as usize, rows);
    assert_eq!(v["checks"].as_array().unwrap().len(), rows);
}
