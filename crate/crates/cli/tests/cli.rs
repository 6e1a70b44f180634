use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reachavoid"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn small_example1(dir: &Path, extra: &str) -> String {
    let body = format!(r#"{{"version": 1, "problem": {{"builtin": {{"name": "example1"}}}}, "grid": [41]{extra}}}"#);
    write_config(dir, "config.json", &body)
}

#[test]
fn solve_writes_frames_and_manifest() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_example1(tmp.path(), "");
    let out = run(&["solve", &cfg, "--out", "run"], tmp.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let manifest: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("run/manifest.json")).unwrap()).unwrap();
    let expected = [0.5, 0.45, 0.3, 0.1, 0.05, 0.0];
    let files = manifest["files"].as_array().unwrap();
    assert_eq!(files.len(), 6);
    for (f, t) in files.iter().zip(expected) {
        assert_eq!(f["time"].as_f64().unwrap(), t);
        assert!(tmp.path().join("run").join(f["file"].as_str().unwrap()).is_file());
    }
    assert!(!manifest["cfl_history"].as_array().unwrap().is_empty());
}

#[test]
fn configuration_errors_exit_with_two() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&run(&["solve", "nope.json"], tmp.path())), 2);

    let cfg = write_config(
        tmp.path(),
        "tiny.json",
        r#"{"version": 1, "problem": {"builtin": {"name": "example1"}}, "grid": [5, 5]}"#,
    );
    assert_eq!(code(&run(&["solve", &cfg, "--out", "o"], tmp.path())), 2);

    let cfg = write_config(
        tmp.path(),
        "typo.json",
        r#"{"version": 1, "problem": {"builtin": {"name": "example1"}}, "frames": 3}"#,
    );
    assert_eq!(code(&run(&["solve", &cfg, "--out", "o"], tmp.path())), 2);

    // simulate without a prior solve
    let cfg = small_example1(tmp.path(), "");
    assert_eq!(code(&run(&["simulate", &cfg, "--out", "empty"], tmp.path())), 2);
}

#[test]
fn quick_convergence_study_passes() {
    let tmp = TempDir::new().unwrap();
    let out = run(&["converge", "--quick", "--out", "conv"], tmp.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(tmp.path().join("conv/convergence.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "N,spacing,mean_error,max_error");
    assert_eq!(rows.len(), 3);
}

#[test]
fn unmet_threshold_exits_with_one() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "strict.json",
        r#"{"version": 1, "problem": {"builtin": {"name": "example1"}},
            "converge": {"counts": [51], "points": 2000, "max_mean_cells": 0.01}}"#,
    );
    let out = run(&["converge", &cfg, "--out", "conv"], tmp.path());
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("N=51"));
}

#[test]
fn contour_of_a_stored_frame() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_example1(tmp.path(), "");
    assert_eq!(code(&run(&["solve", &cfg, "--out", "run"], tmp.path())), 0);
    let out = run(&["contour", "run/frame_005.hjra"], tmp.path());
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), "segment_id,x1,y1,x2,y2");
    assert!(text.lines().count() > 20);

    let out = run(&["contour", "run/frame_005.hjra", "--slice", "0=0.0"], tmp.path());
    assert_eq!(code(&out), 2, "a 1-D slice has no planar contour");
}

#[test]
fn simulation_is_deterministic_for_a_seed() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_example1(
        tmp.path(),
        r#", "simulate": {"starts": 10, "start_states": [[0.0, 0.7]], "trajectories": 2}"#,
    );
    assert_eq!(code(&run(&["solve", &cfg, "--out", "run"], tmp.path())), 0);
    let mut summaries = Vec::new();
    for _ in 0..2 {
        let out = run(&["simulate", &cfg, "--out", "run", "--seed", "7"], tmp.path());
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        summaries.push((
            fs::read_to_string(tmp.path().join("run/simulation.json")).unwrap(),
            fs::read_to_string(tmp.path().join("run/traj_negative_000.csv")).unwrap(),
        ));
    }
    assert_eq!(summaries[0], summaries[1]);

    // the explicit start lies inside the target: an immediate win
    let summary: Value = serde_json::from_str(&summaries[0].0).unwrap();
    let explicit = &summary["groups"][2];
    assert_eq!(explicit["group"], "explicit");
    assert_eq!(explicit["wins"], 1);
    let traj = fs::read_to_string(tmp.path().join("run/traj_explicit_000.csv")).unwrap();
    assert_eq!(traj.lines().count(), 2);
}

#[test]
fn benchmark_on_a_small_planar_problem() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "bench.json",
        r#"{"version": 1, "problem": {"builtin": {"name": "example1"}},
            "benchmark": {"native_grid": [31], "augmented_grid": [31, 31, 16], "min_speedup": 1.0, "max_cells": 3.0}}"#,
    );
    let out = run(&["benchmark", &cfg, "--out", "bench"], tmp.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("bench/benchmark.json")).unwrap()).unwrap();
    assert!(report["speedup"].as_f64().unwrap() > 1.0);
    assert_eq!(report["agreement"].as_array().unwrap().len(), 1);
}
