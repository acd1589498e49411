//! End-to-end checks of the command-line binary: exit codes, diagnostics and
//! artifact shapes.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_plapgame")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

fn write_cfg(dir: &Path, value: &serde_json::Value) -> String {
    let path = dir.join("cfg.json");
    std::fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

fn base_cfg() -> serde_json::Value {
    serde_json::json!({
        "problem": {
            "domain": { "kind": "interval", "params": [0.0, 1.0] },
            "weight": { "kind": "affine", "params": [1.0] },
            "boundary": { "kind": "affine", "params": [0.0, 1.0], "lipschitz": true },
            "p": 4.0,
            "eps": 0.1,
            "h": 0.025
        },
        "solve": { "tol": 1e-8, "max_iter": 200000 }
    })
}

#[test]
fn solve_succeeds_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), &base_cfg());
    let out_dir = dir.path().join("out");
    let out = run(&[
        "solve",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("solve_report.json")).unwrap())
            .unwrap();
    assert!(report["converged"].as_bool().unwrap());
    assert!(report["final_residual"].as_f64().unwrap() <= 1e-8);
    let csv = std::fs::read_to_string(out_dir.join("value.csv")).unwrap();
    assert!(csv.starts_with("x0,region,value"));
}

#[test]
fn invalid_p_exits_2_naming_the_constraint() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base_cfg();
    cfg["problem"]["p"] = serde_json::json!(2.0);
    let path = write_cfg(dir.path(), &cfg);
    let out = run(&["solve", "--config", &path]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("p must be"), "stderr: {err}");
}

#[test]
fn coarse_lattice_exits_2_citing_the_rule() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base_cfg();
    cfg["problem"]["h"] = serde_json::json!(0.06);
    let path = write_cfg(dir.path(), &cfg);
    let out = run(&["solve", "--config", &path]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("resolution rule"), "stderr: {err}");
}

#[test]
fn lipschitz_violation_diagnosed_by_validate() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base_cfg();
    cfg["problem"]["boundary"]["params"] = serde_json::json!([0.0, 2.0]);
    let path = write_cfg(dir.path(), &cfg);
    let out = run(&["validate", "--config", &path]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("Lipschitz"), "stderr: {err}");
}

#[test]
fn validate_accepts_the_reference_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_cfg(dir.path(), &base_cfg());
    let out = run(&["validate", "--config", &path]);
    assert!(out.status.success());
}

#[test]
fn malformed_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{ not json").unwrap();
    let out = run(&["solve", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("malformed config"));
}

#[test]
fn missing_config_exits_2() {
    let out = run(&["solve", "--config", "/nonexistent/cfg.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot read config"));
}

#[test]
fn unknown_command_is_rejected() {
    let out = run(&["frobnicate", "--config", "x.json"]);
    assert!(!out.status.success());
}

#[test]
fn unconverged_solve_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base_cfg();
    cfg["solve"]["max_iter"] = serde_json::json!(3);
    cfg["solve"]["tol"] = serde_json::json!(1e-14);
    let path = write_cfg(dir.path(), &cfg);
    let out = run(&[
        "solve",
        "--config",
        &path,
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn moment_reference_appears_in_json() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base_cfg();
    cfg["moment"] = serde_json::json!({ "n": 2, "eps": 1.0, "points": 200000 });
    let path = write_cfg(dir.path(), &cfg);
    let out_dir = dir.path().join("out");
    let out = run(&[
        "moment",
        "--config",
        &path,
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(out_dir.join("moment.json")).unwrap();
    assert!(text.contains("2.5000000000000000e-1"), "{text}");
}

#[test]
fn oracle_and_studies_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base_cfg();
    cfg["oracle"] = serde_json::json!({ "samples": 11, "quad_points": 512 });
    cfg["study_eps"] = serde_json::json!({ "eps_list": [0.2, 0.1] });
    let path = write_cfg(dir.path(), &cfg);
    let out_dir = dir.path().join("out");
    let out = run(&[
        "oracle",
        "--config",
        &path,
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let oracle = std::fs::read_to_string(out_dir.join("oracle.csv")).unwrap();
    assert_eq!(oracle.lines().count(), 12);
    let out = run(&[
        "study-eps",
        "--config",
        &path,
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out_dir.join("study_eps.csv").exists());
    assert!(out_dir.join("study_eps.json").exists());
}

#[test]
fn solve_output_independent_of_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_cfg(dir.path(), &base_cfg());
    let run_w = |workers: &str, out: &str| {
        let out_dir = dir.path().join(out);
        let out = run(&[
            "solve",
            "--config",
            &path,
            "--out",
            out_dir.to_str().unwrap(),
            "--workers",
            workers,
        ]);
        assert!(out.status.success());
        std::fs::read(out_dir.join("value.csv")).unwrap()
    };
    assert_eq!(run_w("1", "w1"), run_w("2", "w2"));
}

#[test]
fn consistency_command_writes_deviation_table() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base_cfg();
    cfg["consistency"] = serde_json::json!({
        "phi": { "kind": "quadratic", "params": [1.0, 0.3, 0.2] },
        "x": [0.5],
        "eps_list": [0.2, 0.1]
    });
    let path = write_cfg(dir.path(), &cfg);
    let out_dir = dir.path().join("out");
    let out = run(&[
        "consistency",
        "--config",
        &path,
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    let csv = std::fs::read_to_string(out_dir.join("consistency.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    let json = std::fs::read_to_string(out_dir.join("consistency.json")).unwrap();
    assert!(json.contains("reference"));
}

#[test]
fn seed_flag_overrides_config_seed() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base_cfg();
    cfg["simulate"] = serde_json::json!({
        "x0": [0.5], "n_samples": 50, "seed": 1, "max_steps": 100000, "n_export": 2
    });
    let path = write_cfg(dir.path(), &cfg);
    let run_seed = |seed: Option<&str>, out: &str| {
        let out_dir = dir.path().join(out);
        let mut args = vec![
            "simulate",
            "--config",
            path.as_str(),
            "--out",
            out_dir.to_str().unwrap(),
        ];
        if let Some(s) = seed {
            args.push("--seed");
            args.push(s);
        }
        let out = run(&args);
        assert!(out.status.success());
        std::fs::read(out_dir.join("trajectories.csv")).unwrap()
    };
    let default = run_seed(None, "o1");
    let same = run_seed(Some("1"), "o2");
    let different = run_seed(Some("2"), "o3");
    assert_eq!(default, same);
    assert_ne!(default, different);
}
