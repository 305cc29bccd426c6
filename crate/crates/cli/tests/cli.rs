//! End-to-end checks of the command-line interface.

use std::path::Path;
use std::process::{Command, Output};

use danzerlab::pointset::PointSet;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_danzerlab")).current_dir(dir).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn bounds_reports_constants() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["bounds", "--d", "2"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["alpha_d"], 36.0);
    assert_eq!(v["t"], 108);
    assert!((v["c_d"].as_f64().unwrap() - 0.0289224).abs() < 1e-6);
    assert_eq!(run(dir.path(), &["bounds", "--d", "1"]).status.code(), Some(2));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["generate"]).status.code(), Some(2));
    assert_eq!(
        run(dir.path(), &["verify", "--in", "missing.dps", "--region", "Q4", "--volume", "1"]).status.code(),
        Some(2)
    );
    let bad = run(dir.path(), &["witness", "substitution", "--system", "nope"]);
    assert_eq!(bad.status.code(), Some(2));
    std::fs::write(dir.path().join("spec.json"), "{\"n\": 3}").unwrap();
    let bad = run(dir.path(), &["generate", "cutproject", "--spec", "spec.json", "--radius", "5", "--out", "x.dps"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn net_round_trip_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["generate", "net", "--n", "12", "--seed", "3", "--restarts", "40", "--out", "net.dps"]);
    let report = json(&out);
    let certified = report["certified"].as_bool().unwrap();
    assert_eq!(out.status.code(), Some(if certified { 0 } else { 1 }));
    let y = PointSet::read_dps(&dir.path().join("net.dps")).unwrap();
    assert_eq!(report["size"].as_u64().unwrap() as usize, y.len());
    let v = run(dir.path(), &["verify", "--in", "net.dps", "--region", "Q6", "--volume", "1", "--restarts", "40"]);
    assert_eq!(json(&v)["certified"].as_bool().unwrap(), v.status.success());
}

#[test]
fn verify_finds_gap_in_sparse_grid() {
    let dir = tempfile::tempdir().unwrap();
    PointSet::integer_grid(2, 10).rescale(3.0).unwrap().write_dps(&dir.path().join("g.dps")).unwrap();
    let out = run(dir.path(), &["verify", "--in", "g.dps", "--region", "Q20", "--volume", "4", "--restarts", "30"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(json(&out)["worst_axis_area"].as_f64().unwrap() >= 9.0 - 1e-9);
}

#[test]
fn substitution_witness_and_patch() {
    let dir = tempfile::tempdir().unwrap();
    let w = run(dir.path(), &["witness", "substitution", "--system", "chair", "--choice", "vertex", "--out", "w.json"]);
    assert!(w.status.success());
    assert!(json(&w)["volume"].as_f64().unwrap() >= 1.0);
    assert!(dir.path().join("w.json").exists());
    let g = run(dir.path(), &["generate", "substitution", "--system", "chair", "--generation", "3", "--out", "c.dps"]);
    assert!(g.status.success());
    let r = json(&g);
    assert_eq!(r["tiles"], 64);
    assert_eq!(r["predicted_tiles"], 64);
    assert_eq!(r["points"], 64);
}

#[test]
fn cutproject_witness_and_measurements() {
    let dir = tempfile::tempdir().unwrap();
    let g = run(dir.path(), &["generate", "cutproject", "--spec", "golden", "--radius", "30", "--out", "cp.dps"]);
    assert!(g.status.success());
    let w = run(dir.path(), &["witness", "cutproject", "--spec", "golden", "--T", "1.5", "--budget", "3000"]);
    assert!(w.status.success());
    assert_eq!(json(&w)["empty"], true);
    let m = run(dir.path(), &["measure", "growth", "--in", "cp.dps", "--radii", "4,8,16"]);
    assert!(m.status.success());
    let text = String::from_utf8(m.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "T,count,normalized");
    assert_eq!(lines.len(), 4);
    let f = run(
        dir.path(),
        &[
            "measure",
            "forest",
            "--in",
            "cp.dps",
            "--T",
            "1,2,4,8",
            "--samples",
            "200",
            "--window",
            "0,0,4,4",
            "--out",
            "f.csv",
        ],
    );
    assert!(f.status.success());
    assert!(json(&f)["fit"]["slope"].as_f64().unwrap() < 0.0);
    let csv = std::fs::read_to_string(dir.path().join("f.csv")).unwrap();
    assert!(csv.starts_with("T,eps_hat,samples,seed\n"));
}

#[test]
fn thread_flag_and_env_agree() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["witness", "cutproject", "--spec", "golden", "--T", "1.5", "--budget", "2000"];
    let a = run(dir.path(), &[&["--threads", "1"][..], &args[..]].concat());
    let b = Command::new(env!("CARGO_BIN_EXE_danzerlab"))
        .current_dir(dir.path())
        .env("DANZERLAB_THREADS", "2")
        .args(args)
        .output()
        .unwrap();
    assert_eq!(a.stdout, b.stdout);
}
