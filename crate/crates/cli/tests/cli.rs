use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use iscpb_core::default_scenario;
use serde_json::Value;

fn iscpb(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iscpb"))
        .env_remove("ISCPB_OUT")
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("spawn iscpb")
}

fn stdout_json(o: &Output) -> Value {
    let text = String::from_utf8_lossy(&o.stdout);
    let line = text.lines().last().unwrap_or_else(|| panic!("no stdout; stderr: {}", String::from_utf8_lossy(&o.stderr)));
    serde_json::from_str(line).expect("stdout is JSON")
}

#[test]
fn clutter_curve_covers_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let o = iscpb(dir.path(), &["clutter-curve"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout_json(&o)["rows"], 900);

    let mut rdr = csv::Reader::from_path(dir.path().join("clutter_curve.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (k, g, s2) = (col("sea_state"), col("grazing_deg"), col("sigma_sc2"));
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 900);
    let vertical = rows
        .iter()
        .find(|r| r[k].parse::<u8>().unwrap() == 3 && r[g].parse::<f64>().unwrap() == 90.0)
        .expect("κ=3, 90° row");
    let v: f64 = vertical[s2].parse().unwrap();
    assert!((v - 26.936991).abs() < 1e-5, "σ_sc2 = {v}");
}

#[test]
fn bad_input_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = iscpb(dir.path(), &["sweep", "--sweep", "wind=1,2"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stdout_json(&o)["status"], "validation_error");

    let o = iscpb(dir.path(), &["sweep", "--sweep", "sea_state=2.5"]);
    assert_eq!(o.status.code(), Some(3));

    let o = iscpb(dir.path(), &["--scenario", "/nonexistent/scenario.json", "run"]);
    assert_eq!(o.status.code(), Some(3));

    let o = iscpb(dir.path(), &["run", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn environment_overrides_output_directory() {
    let flag = tempfile::tempdir().unwrap();
    let env = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_iscpb"))
        .env("ISCPB_OUT", env.path())
        .arg("--out")
        .arg(flag.path())
        .arg("clutter-curve")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(env.path().join("clutter_curve.csv").exists());
    assert!(!flag.path().join("clutter_curve.csv").exists());
}

#[test]
fn run_writes_repeatable_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = iscpb(a.path(), &["run"]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let summary = stdout_json(&first);
    for key in ["avg_rate_per_ts", "avg_harvested_mW", "min_buoy_mi", "min_buoy_rate", "feasible", "outer_iters"] {
        assert!(summary.get(key).is_some(), "summary lacks {key}: {summary}");
    }
    assert!(summary["avg_rate_per_ts"].as_f64().unwrap() > 22.0);
    assert_eq!(summary["feasible"], true);

    assert!(iscpb(b.path(), &["run"]).status.success());
    for file in ["state.csv", "metrics.csv", "trace.csv", "summary.json"] {
        let x = fs::read(a.path().join(file)).unwrap();
        let y = fs::read(b.path().join(file)).unwrap();
        assert!(x == y, "{file} differs between runs");
    }
}

#[test]
fn infeasible_scenario_reports_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = default_scenario();
    cfg.gamma_c_th = 1e3;
    let path = dir.path().join("scenario.json");
    cfg.save(&path).unwrap();
    let out = dir.path().join("out");
    let o = iscpb(&out, &["--scenario", path.to_str().unwrap(), "run"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stdout_json(&o);
    assert_eq!(err["status"], "infeasible");
    assert!(err["certificate"].is_object(), "{err}");
    assert!(out.join("certificate.json").exists());
}

#[test]
fn verify_reports_failures_through_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = iscpb(dir.path(), &["verify"]);
    assert_eq!(o.status.code(), Some(1));
    let text = String::from_utf8_lossy(&o.stdout);
    let mut lines = text.lines();
    let checks: Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    assert_eq!(checks.as_array().unwrap().len(), 8);
    let err: Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    assert_eq!(err["status"], "verification_failed");
    assert!(dir.path().join("verify.csv").exists());
}
