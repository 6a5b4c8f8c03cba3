//! End-to-end checks of the command-line surface: exit codes, file
//! contracts, CSV format, and byte determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_eigenrom")
}

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(bin())
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("eigenrom_cli_{name}"));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

const SMALL_HO1D: &str = r#"{
  "problem": "ho1d",
  "mesh": {"h": 0.2},
  "mode": {"single": {"eigen_index": 0}},
  "training": {"kind": "uniform_grid", "counts": [9]},
  "test": {"kind": "explicit", "points": [[2.5], [5.0], [7.5]]},
  "epsilon": 1e-8,
  "gpr": {"starts": 4, "seed": 7},
  "out_dir": "out",
  "dense_grid": 21,
  "tolerances": {"lambda_abs": 0.05, "coverage_min": 0.5}
}"#;

#[test]
fn full_pipeline_and_determinism() {
    let dir = workdir("pipeline");
    write_config(&dir, "run.json", SMALL_HO1D);

    let out = run(&["train", "--config", "run.json"], &dir);
    assert!(out.status.success(), "train failed: {}", String::from_utf8_lossy(&out.stderr));
    let model_path = dir.join("out/rom_model.json");
    assert!(model_path.exists());
    assert!(dir.join("out/manifest.json").exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("out/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["problem"], "ho1d");
    assert_eq!(manifest["schema"], "eigenrom/1");
    assert!(manifest["n_regressors"].as_u64().unwrap() >= 2);

    // byte-identical model on re-run
    let first = std::fs::read(&model_path).unwrap();
    let out = run(&["train", "--config", "run.json"], &dir);
    assert!(out.status.success());
    let second = std::fs::read(&model_path).unwrap();
    assert_eq!(first, second, "retraining must reproduce the model bytes");

    // predict: eigenvalue table with sane bands + dense curves
    let out = run(&["predict", "--config", "run.json"], &dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dd = std::fs::read_to_string(dir.join("out/dd_eigenvalues.csv")).unwrap();
    let mut lines = dd.lines();
    assert_eq!(lines.next().unwrap(), "mu_1,k,lambda,lambda_lo,lambda_hi");
    let mut rows = 0;
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 5);
        let lambda: f64 = fields[2].parse().unwrap();
        let lo: f64 = fields[3].parse().unwrap();
        let hi: f64 = fields[4].parse().unwrap();
        assert!(lo <= lambda && lambda <= hi, "band ordering in {line}");
        rows += 1;
    }
    assert_eq!(rows, 3);
    let curves = std::fs::read_to_string(dir.join("out/gpr_curves.csv")).unwrap();
    assert_eq!(curves.lines().count() - 1, 21, "dense grid rows = grid^d");
    assert!(!curves.contains('\r'), "LF line endings only");

    // evaluate passes its configured tolerances
    let out = run(&["evaluate", "--config", "run.json"], &dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_to_string(dir.join("out/error_report.csv")).unwrap();
    assert_eq!(
        report.lines().next().unwrap(),
        "mu_1,k,lambda_fem,lambda_dd,lambda_lo,lambda_hi,vec_inf_err,vec_l2_rel_err"
    );
    assert!(dir.join("out/evaluation_summary.txt").exists());
}

#[test]
fn fom_writes_reference_values() {
    let dir = workdir("fom");
    write_config(&dir, "run.json", SMALL_HO1D);
    let out = run(&["fom", "--config", "run.json"], &dir);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.join("out/fom_eigenvalues.csv")).unwrap();
    let row = csv.lines().nth(1).unwrap();
    let fields: Vec<&str> = row.split(',').collect();
    let mu: f64 = fields[0].parse().unwrap();
    let lambda: f64 = fields[2].parse().unwrap();
    assert_eq!(mu, 2.5);
    // coarse mesh, so only a loose check against the analytic 1.25
    assert!((lambda - 1.25).abs() < 0.02, "λ₁(2.5) = {lambda}");
    // 17 significant digits in scientific notation
    assert!(fields[2].contains('e'), "expected scientific notation: {row}");

    // empty test design produces a header-only file
    let empty = SMALL_HO1D.replace(
        r#""test": {"kind": "explicit", "points": [[2.5], [5.0], [7.5]]}"#,
        r#""test": {"kind": "explicit", "points": []}"#,
    );
    write_config(&dir, "empty.json", &empty);
    let out = run(&["fom", "--config", "empty.json", "--out", "out_empty"], &dir);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.join("out_empty/fom_eigenvalues.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1, "header only");
}

#[test]
fn exit_codes() {
    let dir = workdir("exits");
    // 2: unreadable / invalid config
    let out = run(&["train", "--config", "missing.json"], &dir);
    assert_eq!(out.status.code(), Some(2));
    write_config(&dir, "bad.json", r#"{"problem": "nope", "mesh": {"h": 0.2}}"#);
    let out = run(&["train", "--config", "bad.json"], &dir);
    assert_eq!(out.status.code(), Some(2));
    write_config(
        &dir,
        "badmesh.json",
        r#"{"problem": "ho1d", "mesh": {"h": 0.2, "n": 5}}"#,
    );
    let out = run(&["train", "--config", "badmesh.json"], &dir);
    assert_eq!(out.status.code(), Some(2));

    // train a tiny model, then drive the tolerance (1) and provenance (2) gates
    write_config(&dir, "run.json", SMALL_HO1D);
    assert!(run(&["train", "--config", "run.json"], &dir).status.success());
    let impossible = SMALL_HO1D.replace(
        r#""tolerances": {"lambda_abs": 0.05, "coverage_min": 0.5}"#,
        r#""tolerances": {"lambda_abs": 1e-15}"#,
    );
    write_config(&dir, "tight.json", &impossible);
    let out = run(&["evaluate", "--config", "tight.json"], &dir);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));

    let wrong_mesh = SMALL_HO1D.replace(r#""mesh": {"h": 0.2}"#, r#""mesh": {"h": 0.1}"#);
    write_config(&dir, "wrongmesh.json", &wrong_mesh);
    let out = run(&["evaluate", "--config", "wrongmesh.json"], &dir);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    // 2: training design outside the parameter box
    let outside = SMALL_HO1D.replace(
        r#""training": {"kind": "uniform_grid", "counts": [9]}"#,
        r#""training": {"kind": "uniform_grid", "counts": [9], "bounds": [[0.5, 9.0]]}"#,
    );
    write_config(&dir, "outside.json", &outside);
    let out = run(&["train", "--config", "outside.json", "--out", "out2"], &dir);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn seed_override_changes_model() {
    let dir = workdir("seed");
    write_config(&dir, "run.json", SMALL_HO1D);
    assert!(run(&["train", "--config", "run.json"], &dir).status.success());
    let base = std::fs::read_to_string(dir.join("out/rom_model.json")).unwrap();
    assert!(
        run(&["train", "--config", "run.json", "--out", "out_seeded", "--seed", "99"], &dir)
            .status
            .success()
    );
    let seeded = std::fs::read_to_string(dir.join("out_seeded/rom_model.json")).unwrap();
    // a different multi-start seed may land on the same optimum, but the
    // file must remain a valid model either way; determinism per seed is
    // covered in full_pipeline_and_determinism
    assert!(!seeded.is_empty() && !base.is_empty());
}

#[test]
fn jobs_env_fallback_accepted() {
    let dir = workdir("jobs");
    write_config(&dir, "run.json", SMALL_HO1D);
    let out = Command::new(bin())
        .args(["train", "--config", "run.json"])
        .env("EIGENROM_JOBS", "2")
        .current_dir(&dir)
        .output()
        .unwrap();
    assert!(out.status.success());
}
