use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn dmix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dmix"))
        .args(args)
        .output()
        .unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

const GAUSS_PROBLEM: &str = r#"{
  "dim": 1,
  "L": 6,
  "symmetric": false,
  "moments": [{"index": [1], "value": 0.0}, {"index": [2], "value": 1.0}],
  "solver": {"tol_eq": 1e-6, "ε_slack": 1e-3, "restarts": 5}
}"#;

#[test]
fn preset_solve_meets_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let out = dmix(&[
        "solve",
        "--preset",
        "gauss1d",
        "--L",
        "6",
        "--seed",
        "0",
        "--output-dir",
        p(dir.path()),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let sol = json(dir.path().join("solution.json"));
    assert!(sol["residual"].as_f64().unwrap() <= 1e-6);
    assert_eq!(sol["converged"], Value::Bool(true));
    let points = fs::read_to_string(dir.path().join("points.csv")).unwrap();
    assert!(points.starts_with("x1,d,w\n"));
    assert_eq!(points.lines().count(), 7);
    let pwc = fs::read_to_string(dir.path().join("pwc.csv")).unwrap();
    assert!(pwc.starts_with("x1,d,w,h\n"));
    let manifest = json(dir.path().join("manifest.json"));
    assert_eq!(manifest["preset"], "gauss1d");
    assert_eq!(manifest["options"]["seed"], 0);
}

#[test]
fn lm_seeds_give_different_points() {
    let dir = tempfile::tempdir().unwrap();
    let prob = dir.path().join("prob.json");
    fs::write(&prob, GAUSS_PROBLEM).unwrap();
    let mut csvs = Vec::new();
    for seed in ["1", "2"] {
        let out_dir = dir.path().join(seed);
        let out = dmix(&[
            "solve",
            "--input",
            p(&prob),
            "--method",
            "lm",
            "--seed",
            seed,
            "--output-dir",
            p(&out_dir),
        ]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        csvs.push(fs::read(out_dir.join("points.csv")).unwrap());
        let manifest = json(out_dir.join("manifest.json"));
        assert_eq!(manifest["input"]["sha256"].as_str().unwrap().len(), 64);
    }
    assert_ne!(csvs[0], csvs[1]);
}

#[test]
fn malformed_json_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let prob = dir.path().join("bad.json");
    fs::write(&prob, "{\"dim\": 1, \"L\": ").unwrap();
    let out = dmix(&["solve", "--input", p(&prob), "--output-dir", p(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.json"));
}

#[test]
fn invalid_problems_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        r#"{"dim": 1, "L": 3, "symmetric": true, "mean": [0.0], "moments": [{"index": [2], "value": 1.0}]}"#,
        r#"{"dim": 1, "L": 4, "symmetric": true, "moments": [{"index": [2], "value": 1.0}]}"#,
        r#"{"dim": 2, "L": 4, "moments": [{"index": [2], "value": 1.0}]}"#,
        r#"{"dim": 1, "L": 4, "moments": [{"index": [0], "value": 2.0}]}"#,
    ];
    for (i, case) in cases.iter().enumerate() {
        let prob = dir.path().join(format!("case{i}.json"));
        fs::write(&prob, case).unwrap();
        let out = dmix(&["solve", "--input", p(&prob), "--output-dir", p(dir.path())]);
        assert_eq!(
            out.status.code(),
            Some(2),
            "case {i}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let out = dmix(&["solve", "--preset", "nope"]);
    assert_eq!(out.status.code(), Some(2));
    let out = dmix(&["solve", "--preset", "gauss1d", "--input", "x.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn non_convergence_exits_3_and_still_writes() {
    let dir = tempfile::tempdir().unwrap();
    let prob = dir.path().join("jensen.json");
    fs::write(&prob, r#"{"dim": 1, "L": 2, "moments": [{"index": [1], "value": 1.0}, {"index": [2], "value": 0.5}]}"#)
        .unwrap();
    let out = dmix(&["solve", "--input", p(&prob), "--output-dir", p(dir.path())]);
    assert_eq!(out.status.code(), Some(3));
    let sol = json(dir.path().join("solution.json"));
    assert_eq!(sol["converged"], Value::Bool(false));
    assert!(sol["message"].as_str().unwrap().contains("no root"));
}

#[test]
fn moments_of_densities() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("normal.json");
    fs::write(&spec, r#"{"kind": "gaussian", "mean": 0.0, "std": 1.0}"#).unwrap();
    let out = dmix(&[
        "moments",
        "--input",
        p(&spec),
        "--order",
        "2",
        "--output-dir",
        p(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let m = json(dir.path().join("moments.json"));
    let entries = m["entries"].as_array().unwrap();
    assert_eq!(entries[1]["index"], serde_json::json!([1]));
    assert_eq!(entries[1]["value"].as_f64(), Some(0.0));
    assert_eq!(entries[2]["value"].as_f64(), Some(1.0));

    let spec = dir.path().join("gm.json");
    fs::write(
        &spec,
        r#"{"kind": "gaussian-mixture", "components": [
            {"weight": 0.4, "mean": -1.5, "std": 0.7}, {"weight": 0.6, "mean": 1.5, "std": 0.7}]}"#,
    )
    .unwrap();
    let out = dmix(&[
        "moments",
        "--input",
        p(&spec),
        "--order",
        "4",
        "--output-dir",
        p(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let m = json(dir.path().join("moments.json"));
    let values: Vec<f64> = m["entries"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["value"].as_f64().unwrap())
        .collect();
    assert_eq!(values.len(), 5);
    let table = dmix_core::eval::preset("gm1d_m4").unwrap();
    let lib: Vec<f64> = table.target(None).unwrap().iter().map(|(_, v)| v).collect();
    assert_eq!(values, lib);

    let spec = dir.path().join("bad.json");
    fs::write(&spec, r#"{"kind": "gaussian", "mean": 0.0, "std": -1.0}"#).unwrap();
    let out = dmix(&[
        "moments",
        "--input",
        p(&spec),
        "--order",
        "2",
        "--output-dir",
        p(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_then_moments_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dmix(&[
        "solve",
        "--preset",
        "gm1d_m4",
        "--output-dir",
        p(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let sol_path = dir.path().join("solution.json");
    let mdir = dir.path().join("m");
    let out = dmix(&[
        "moments",
        "--input",
        p(&sol_path),
        "--order",
        "4",
        "--output-dir",
        p(&mdir),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let got = json(mdir.join("moments.json"));
    let sol = json(sol_path);
    let target = sol["target"]["entries"].as_array().unwrap();
    for (g, t) in got["entries"].as_array().unwrap().iter().zip(target) {
        assert_eq!(g["index"], t["index"]);
        assert!((g["value"].as_f64().unwrap() - t["value"].as_f64().unwrap()).abs() <= 1e-6);
    }
}

fn solve_and_eval(root: &Path, name: &str, args: &[&str]) -> Value {
    let out_dir = root.join(name);
    let mut full = vec!["solve"];
    full.extend_from_slice(args);
    full.extend_from_slice(&["--output-dir", p(&out_dir)]);
    assert_eq!(dmix(&full).status.code(), Some(0));
    let eval_dir = out_dir.join("eval");
    let out = dmix(&[
        "eval",
        "--solution",
        p(&out_dir.join("solution.json")),
        "--preset",
        "gauss1d",
        "--output-dir",
        p(&eval_dir),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let ecdf = fs::read_to_string(eval_dir.join("ecdf.csv")).unwrap();
    assert!(ecdf.starts_with("x,F\n"));
    assert_eq!(
        fs::read_to_string(eval_dir.join("reference_cdf.csv"))
            .unwrap()
            .lines()
            .count(),
        1001
    );
    json(eval_dir.join("eval.json"))
}

#[test]
fn eval_batch_and_dominance() {
    let dir = tempfile::tempdir().unwrap();
    let mut cvm = Vec::new();
    for l in ["6", "10", "15"] {
        let e = solve_and_eval(
            dir.path(),
            &format!("me{l}"),
            &["--preset", "gauss1d", "--L", l],
        );
        assert_eq!(e["feasible"], Value::Bool(true));
        cvm.push(e["cvm"].as_f64().unwrap());
    }
    assert!(cvm[0] > cvm[1] && cvm[1] > cvm[2], "{cvm:?}");

    let me = solve_and_eval(
        dir.path(),
        "me",
        &["--preset", "gauss1d", "--method", "maxent", "--seed", "4"],
    );
    let lm = solve_and_eval(
        dir.path(),
        "lm",
        &["--preset", "gauss1d", "--method", "lm", "--seed", "4"],
    );
    assert!(me["entropy"].as_f64().unwrap() >= lm["entropy"].as_f64().unwrap());
}

#[test]
fn eval_is_deterministic_and_checks_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    let out = dmix(&[
        "solve",
        "--preset",
        "gauss2d_sym",
        "--output-dir",
        p(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let sol = dir.path().join("solution.json");
    let mut outputs = Vec::new();
    for k in 0..2 {
        let e = dir.path().join(format!("e{k}"));
        assert_eq!(
            dmix(&["eval", "--solution", p(&sol), "--output-dir", p(&e)])
                .status
                .code(),
            Some(0)
        );
        outputs.push(fs::read(e.join("eval.json")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let e = json(dir.path().join("e0").join("eval.json"));
    assert_eq!(e["cvm"], Value::Null);
    assert_eq!(e["feasible"], Value::Bool(true));

    let out = dmix(&[
        "eval",
        "--solution",
        p(&sol),
        "--preset",
        "gauss1d",
        "--output-dir",
        p(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn manifest_rerun_rejects_changed_input() {
    let dir = tempfile::tempdir().unwrap();
    let prob = dir.path().join("prob.json");
    fs::write(&prob, GAUSS_PROBLEM).unwrap();
    let first = dir.path().join("first");
    assert_eq!(
        dmix(&["solve", "--input", p(&prob), "--output-dir", p(&first)])
            .status
            .code(),
        Some(0)
    );
    fs::write(&prob, GAUSS_PROBLEM.replace("\"L\": 6", "\"L\": 7")).unwrap();
    let out = dmix(&[
        "solve",
        "--manifest",
        p(&first.join("manifest.json")),
        "--output-dir",
        p(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("changed"));
}
