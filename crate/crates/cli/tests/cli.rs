use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

use s4gauge::coulomb::GAUGEFIX_CSV_HEADER;
use s4gauge::dilation::PROFILE_CSV_HEADER;
use s4gauge::flow::TRAJECTORY_CSV_HEADER;

fn s4gauge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_s4gauge")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let k = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines.map(|l| l.split(',').nth(k).unwrap().parse().unwrap()).collect()
}

#[test]
fn energy_of_the_basic_instanton() {
    let o = s4gauge(&["energy", "--alpha", "1.5", "--adhm", "0", "1"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let want = 6f64.powf(1.5) * 4.0 / 3.0 * PI * PI;
    assert!((v["value"].as_f64().unwrap() / want - 1.0).abs() < 1e-8);
    assert!(v["residual"].as_f64().unwrap() <= 1e-8 * want);
}

#[test]
fn charge_of_a_translated_instanton() {
    let o = s4gauge(&["charge", "--adhm", "0.1,0.2,0,0", "0.9"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["charge"].as_f64().unwrap() - 1.0).abs() < 1e-8);
}

#[test]
fn profile_has_one_row_per_grid_point() {
    let o = s4gauge(&["profile", "--alpha", "1.3", "--lambda-grid", "1:10:20"]);
    assert!(o.status.success());
    let csv = stdout(&o);
    assert_eq!(csv.lines().next().unwrap(), PROFILE_CSV_HEADER);
    assert_eq!(csv.lines().count(), 21);
    let lambdas = column(&csv, "lambda");
    assert_eq!((lambdas[0], lambdas[19]), (1.0, 10.0));
}

#[test]
fn flow_trajectory_energy_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("traj.csv");
    let o = s4gauge(&["flow", "--alpha", "1.1", "--perturb", "0.05", "--out", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&path).unwrap();
    assert_eq!(csv.lines().next().unwrap(), TRAJECTORY_CSV_HEADER);
    let e = column(&csv, "energy");
    assert!(e.len() > 2);
    for w in e.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-13), "{w:?}");
    }
    let lb = 6f64.powf(1.1) * 4.0 / 3.0 * PI * PI;
    assert!((e.last().unwrap() - lb).abs() <= 1e-4);
}

#[test]
fn gaugefix_log_is_written() {
    let o = s4gauge(&["gaugefix", "--nodes", "9"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = stdout(&o);
    assert_eq!(csv.lines().next().unwrap(), GAUGEFIX_CSV_HEADER);
    let r = column(&csv, "residual");
    assert!(r.len() >= 2 && r.last().unwrap() <= &1e-9);
}

#[test]
fn out_of_range_parameters_are_usage_errors() {
    for args in [
        vec!["energy", "--alpha", "2.5"],
        vec!["energy", "--alpha", "1.5", "--lambda", "0.5"],
        vec!["profile", "--alpha", "1.3", "--lambda-grid", "1:1e5:3"],
        vec!["flow", "--alpha", "0.9"],
        vec!["energy", "--alpha", "1.5", "--adhm", "0", "-1"],
    ] {
        let o = s4gauge(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&o.stderr).contains("error:"), "{args:?}");
    }
}

fn verify(dir: &Path, config: &str, extra: &[&str]) -> (Option<i32>, String) {
    let cfg = dir.join("suite.conf");
    std::fs::write(&cfg, config).unwrap();
    let out = dir.join("report.json");
    let mut args = vec!["verify", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = s4gauge(&args);
    (o.status.code(), std::fs::read_to_string(&out).unwrap_or_default())
}

#[test]
fn verify_reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (code, first) = verify(dir.path(), "criteria = [1, 2]\nseed = 11\n", &[]);
    assert_eq!(code, Some(0));
    let (_, second) = verify(dir.path(), "criteria = [1, 2]\nseed = 11\n", &[]);
    assert_eq!(first, second);
    let v: serde_json::Value = serde_json::from_str(&first).unwrap();
    assert_eq!(v["pass"], true);
    assert_eq!(v["checks"].as_array().unwrap().len(), 10);
    assert_eq!(v["metadata"]["config"]["seed"], 11);
}

#[test]
fn absurd_tolerance_fails_the_quadrature_checks() {
    let dir = tempfile::tempdir().unwrap();
    let (code, report) = verify(dir.path(), "criteria = [1]\n", &["--set", "quadrature_tol=1e-30"]);
    assert_eq!(code, Some(1));
    let v: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(v["pass"], false);
    assert!(v["checks"][0]["error"].as_str().unwrap().contains("quadrature"));
}

#[test]
fn bad_or_missing_config_exits_with_two() {
    let o = s4gauge(&["verify", "--config", "/nonexistent/suite.conf"]);
    assert_eq!(o.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(verify(dir.path(), "not a key value file", &[]).0, Some(2));
    assert_eq!(verify(dir.path(), "seed = -3\n", &[]).0, Some(2));
}
