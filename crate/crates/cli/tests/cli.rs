use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn riskshare(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_riskshare"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_stdout(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout)
        .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn json_stderr(o: &Output) -> Value {
    serde_json::from_slice(&o.stderr)
        .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stderr)))
}

fn scenario(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

const MIXED: &str = r#"{
  "distribution": {"values": [3.1, -0.4, 2.2, 5.0, 0.7, -1.9, 1.3, 4.4, -2.6, 0.1]},
  "agents": [
    {"name": "gini", "distortion": "gd", "weight": 1.0},
    {"name": "mad", "distortion": "mmd", "weight": 0.75},
    {"name": "iqd", "distortion": "iqd:0.1", "weight": 0.2}
  ],
  "mode": "mixed",
  "options": {"seed": 5, "trials": 300}
}"#;

#[test]
fn allocate_then_verify_round_trips_welfare() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario(dir.path(), "mixed.json", MIXED);
    let out = dir.path().join("run");
    let (sc_s, out_s) = (sc.to_str().unwrap(), out.to_str().unwrap());

    let a = riskshare(&["allocate", "--scenario", sc_s, "--out", out_s]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let alloc = json_stdout(&a);
    assert!(out.join("allocation.csv").exists() && out.join("welfare.json").exists());
    let welfare = alloc["welfare"].as_f64().unwrap();
    assert!((welfare - alloc["representative_value"].as_f64().unwrap()).abs() < 1e-12);

    let csv = out.join("allocation.csv");
    let v = riskshare(&[
        "verify",
        "--scenario",
        sc_s,
        "--allocation",
        csv.to_str().unwrap(),
        "--out",
        out_s,
    ]);
    assert!(v.status.success(), "{}", String::from_utf8_lossy(&v.stdout));
    let report = json_stdout(&v);
    assert_eq!(report["allocation"]["welfare"].as_f64().unwrap(), welfare);
    assert_eq!(report["dominance"]["violations"], 0);
    assert_eq!(report["pareto"]["violations"], 0);
    assert!(out.join("verify.txt").exists());
}

#[test]
fn fixed_seed_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario(dir.path(), "mixed.json", MIXED);
    let s = sc.to_str().unwrap();
    let first = riskshare(&["verify", "--scenario", s, "--seed", "17"]);
    let second = riskshare(&["verify", "--scenario", s, "--seed", "17"]);
    assert_eq!(first.stdout, second.stdout);
    let other = riskshare(&["verify", "--scenario", s, "--seed", "18"]);
    assert_eq!(json_stdout(&other)["seed"], 18);
}

#[test]
fn exit_codes_follow_error_classes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = riskshare(&["eval", "--scenario", "/nonexistent/scenario.json"]);
    assert_eq!(missing.status.code(), Some(1));

    let bad = scenario(
        dir.path(),
        "bad.json",
        r#"{"distribution": {"values": [1]}, "agents": [{"distortion": "nope"}]}"#,
    );
    let o = riskshare(&["eval", "--scenario", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(json_stderr(&o)["error"].is_string());

    let concave = scenario(
        dir.path(),
        "concave.json",
        r#"{"distribution": {"values": [1, 2, 3, 4]}, "agents": [{"distortion": "gd"}, {"distortion": "mmd"}], "mode": "unconstrained"}"#,
    );
    let o = riskshare(&["allocate", "--scenario", concave.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));

    let grid = scenario(
        dir.path(),
        "grid.json",
        r#"{"distribution": {"values": [1, 2, 3, 4, 5, 6, 7]}, "agents": [{"distortion": "iqd:0.1"}, {"distortion": "iqd:0.25"}], "mode": "unconstrained"}"#,
    );
    let o = riskshare(&["allocate", "--scenario", grid.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    let err = json_stderr(&o);
    assert_eq!(err["error"], "GridIncompatible");
    assert!(err["suggested_n"].as_u64().unwrap().is_multiple_of(20));
}

#[test]
fn improve_makes_allocation_comonotonic() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("a.csv");
    fs::write(
        &csv,
        "state,X,X_1,X_2,region\n0,1,3,-2,middle\n1,2,-1,3,middle\n2,0,0.5,-0.5,middle\n",
    )
    .unwrap();
    let sc = scenario(
        dir.path(),
        "two.json",
        r#"{"distribution": {"values": [1, 2, 0]}, "agents": [{"distortion": "gd"}, {"distortion": "gd"}]}"#,
    );
    let out = dir.path().join("out");
    let o = riskshare(&[
        "improve",
        "--allocation",
        csv.to_str().unwrap(),
        "--scenario",
        sc.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = json_stdout(&o);
    assert_eq!(s["input_comonotonic"], false);
    assert_eq!(s["output_comonotonic"], true);
    assert!(s["after"]["welfare"].as_f64().unwrap() < s["before"]["welfare"].as_f64().unwrap());
    assert!(out.join("improved.csv").exists());
}

#[test]
fn plot_and_gap_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario(
        dir.path(),
        "iqd.json",
        r#"{"distribution": {"values": [8, 7, 6, 5, 4, 3, 2, 1]}, "agents": [{"distortion": "iqd:0.125"}, {"distortion": "iqd:0.125"}], "options": {"plot_points": 11}}"#,
    );
    let out = dir.path().join("out");
    let (s, o) = (sc.to_str().unwrap(), out.to_str().unwrap());
    assert!(riskshare(&["plot", "--scenario", s]).status.code() != Some(0));
    let p = riskshare(&["plot", "--scenario", s, "--out", o]);
    assert!(p.status.success(), "{}", String::from_utf8_lossy(&p.stderr));
    let rows = fs::read_to_string(out.join("distortions.csv")).unwrap();
    assert_eq!(rows.lines().count(), 12);
    let g = riskshare(&["gap", "--scenario", s, "--out", o]);
    assert!(g.status.success(), "{}", String::from_utf8_lossy(&g.stderr));
    assert!(out.join("gap.csv").exists());
    assert_eq!(json_stdout(&g)["gap"].as_f64(), Some(2.0));
}

#[test]
fn eval_reports_each_agent() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario(dir.path(), "mixed.json", MIXED);
    let o = riskshare(&["eval", "--scenario", sc.to_str().unwrap()]);
    assert!(o.status.success());
    let v = json_stdout(&o);
    let names: Vec<&str> = v["agents"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a["name"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["gini", "mad", "iqd"]);
}
