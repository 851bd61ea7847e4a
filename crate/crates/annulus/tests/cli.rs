//! End-to-end checks of the compiled binary: JSON summaries on stdout,
//! deterministic CSV artifacts, saved-profile round trips, and exit codes.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn annulus(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_annulus"))
        .args(args)
        .env("ANNULUS_THREADS", "2")
        .output()
        .expect("binary should launch")
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}, stderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8_lossy(&out.stdout);
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("bad JSON ({e}): {text}"))
}

#[test]
fn solve_trajectory_writes_profile_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("traj.csv");
    let json = stdout_json(&annulus(&[
        "solve", "--f", "plus:p=3,q=1", "--n", "3", "--a", "1", "--alpha", "2",
        "--out", out.to_str().unwrap(),
    ]));
    assert_eq!(json["command"], "solve");
    assert_eq!(json["mode"], "trajectory");
    assert_eq!(json["termination"]["kind"], "zero_hit");
    assert_eq!(json["files"].as_array().unwrap().len(), 2);

    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("r,u,u_prime,I\n"), "header: {}", &csv[..40]);
    assert!(csv.lines().count() > 10);
    let sidecar = dir.path().join("traj.events.json");
    let side: Value =
        serde_json::from_str(&std::fs::read_to_string(&sidecar).unwrap()).unwrap();
    assert_eq!(side["schema"], "annulus-profile-v1");
    assert_eq!(side["n"], 3);
}

#[test]
fn identical_invocations_produce_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &Path| {
        vec![
            "scan".to_string(), "--f".into(), "minus:p=3,q=1".into(), "--n".into(),
            "3".into(), "--a".into(), "1".into(), "--grid-lo".into(), "0.5".into(),
            "--grid-hi".into(), "8".into(), "--grid-points".into(), "24".into(),
            "--out".into(), out.to_str().unwrap().into(),
        ]
    };
    let (o1, o2) = (dir.path().join("s1.csv"), dir.path().join("s2.csv"));
    let a1: Vec<String> = args(&o1);
    let a2: Vec<String> = args(&o2);
    let r1 = annulus(&a1.iter().map(String::as_str).collect::<Vec<_>>());
    let r2 = annulus(&a2.iter().map(String::as_str).collect::<Vec<_>>());
    assert!(r1.status.success() && r2.status.success());
    let b1 = std::fs::read(&o1).unwrap();
    let b2 = std::fs::read(&o2).unwrap();
    assert!(!b1.is_empty() && b1 == b2, "scan CSVs differ between runs");
}

#[test]
fn compare_runs_from_saved_profiles() {
    let dir = tempfile::tempdir().unwrap();
    let (p1, p2) = (dir.path().join("lo.csv"), dir.path().join("hi.csv"));
    for (alpha, path) in [("3.5", &p1), ("6", &p2)] {
        let json = stdout_json(&annulus(&[
            "solve", "--f", "minus:p=3,q=1", "--n", "3", "--a", "1",
            "--alpha", alpha, "--out", path.to_str().unwrap(),
        ]));
        assert_eq!(json["command"], "solve");
    }
    let report_path = dir.path().join("report.json");
    let json = stdout_json(&annulus(&[
        "compare",
        "--profile1", p1.to_str().unwrap(),
        "--profile2", p2.to_str().unwrap(),
        "--out", report_path.to_str().unwrap(),
    ]));
    assert_eq!(json["command"], "compare");
    assert_eq!(json["consistent"], true);
    let steps = json["report"]["steps"].as_array().unwrap();
    assert_eq!(steps.len(), 7);
    assert!(steps
        .iter()
        .any(|s| s["name"] == "rising_flux" && s["status"]["status"] == "verified"));
    assert!(report_path.exists());
}

#[test]
fn exterior_reports_tight_bracket() {
    let json = stdout_json(&annulus(&[
        "exterior", "--f", "minus:p=3,q=1", "--n", "3", "--a", "1",
        "--alpha-lo", "0.5", "--alpha-hi", "5", "--r-max", "50",
    ]));
    assert_eq!(json["command"], "exterior");
    let alpha = json["alpha"].as_f64().unwrap();
    let bracket = json["bracket"].as_array().unwrap();
    let width = bracket[1].as_f64().unwrap() - bracket[0].as_f64().unwrap();
    assert!((alpha - 4.3053).abs() < 1e-3, "alpha = {alpha}");
    assert!(width < 1e-11, "width = {width}");
    assert_eq!(json["tail"]["flux_monotone"], true);
}

#[test]
fn region_verdict_and_conditions_agree_on_slug() {
    let json = stdout_json(&annulus(&[
        "region", "--family", "plus", "--n", "3", "--p", "3", "--q", "1",
    ]));
    assert_eq!(json["verdict"]["inside"], true);
    assert_eq!(json["verdict"]["case"], "iii");

    let json = stdout_json(&annulus(&["conditions", "--f", "minus:p=3,q=1", "--n", "3"]));
    assert_eq!(json["command"], "conditions");
    assert_eq!(json["all_hold"], true);
}

#[test]
fn domain_errors_exit_with_code_two() {
    let out = annulus(&["solve", "--f", "cubic:oops", "--n", "3", "--a", "1", "--alpha", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("error"), "stderr: {stderr}");

    // Missing both --alpha and --b is a domain error as well.
    let out = annulus(&["solve", "--f", "plus:p=3,q=1", "--n", "3", "--a", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn dry_run_prints_plan_without_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never.csv");
    let json = stdout_json(&annulus(&[
        "solve", "--f", "plus:p=3,q=1", "--n", "3", "--a", "1", "--alpha", "2",
        "--out", out.to_str().unwrap(), "--dry-run",
    ]));
    assert_eq!(json["dry_run"], true);
    assert!(!out.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}
