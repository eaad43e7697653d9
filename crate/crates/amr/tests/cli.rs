//! Behavior of the `amr` binary: exit codes, file shapes, determinism of
//! everything except timing columns, and the comparison workflow.

mod common;

use std::fs;
use std::path::{Path, PathBuf};

use common::amr_command;

fn run_ok(args: &[&str]) -> String {
    let output = amr_command().args(args).output().expect("spawn amr");
    assert!(
        output.status.success(),
        "command {args:?} failed:\n{}",
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8(output.stdout).unwrap()
}

fn run_err(args: &[&str]) -> String {
    let output = amr_command().args(args).output().expect("spawn amr");
    assert!(
        !output.status.success(),
        "command {args:?} unexpectedly succeeded"
    );
    String::from_utf8_lossy(&output.stderr).into_owned()
}

/// Columns of a small CSV, keyed by header name.
fn columns(text: &str) -> Vec<(String, Vec<String>)> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let mut cols: Vec<(String, Vec<String>)> =
        header.iter().map(|h| (h.to_string(), Vec::new())).collect();
    for line in lines {
        for (slot, cell) in cols.iter_mut().zip(line.split(',')) {
            slot.1.push(cell.to_string());
        }
    }
    cols
}

#[test]
fn ama_validate_writes_one_row_per_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("validation.csv");
    run_ok(&[
        "ama-validate",
        "--checkpoints",
        "1,10,100",
        "--seed",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next(), Some("i,y,y_hat,t_seconds,eps_percent"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn ama_validate_is_deterministic_outside_the_timing_column() {
    let tmp = tempfile::tempdir().unwrap();
    let out_a = tmp.path().join("a.csv");
    let out_b = tmp.path().join("b.csv");
    for out in [&out_a, &out_b] {
        run_ok(&[
            "ama-validate",
            "--checkpoints",
            "1,10,1000",
            "--seed",
            "9",
            "--out",
            out.to_str().unwrap(),
        ]);
    }
    let cols_a = columns(&fs::read_to_string(&out_a).unwrap());
    let cols_b = columns(&fs::read_to_string(&out_b).unwrap());
    for ((name_a, col_a), (_, col_b)) in cols_a.iter().zip(&cols_b) {
        if name_a == "t_seconds" {
            continue;
        }
        assert_eq!(col_a, col_b, "column {name_a} differs between runs");
    }
}

#[test]
fn ama_validate_rejects_missing_and_bad_checkpoints() {
    let err = run_err(&["ama-validate", "--checkpoints", "10,5"]);
    assert!(err.contains("ascending"), "unexpected message: {err}");
    // a missing value for --checkpoints is a clap usage error
    let output = amr_command()
        .args(["ama-validate"])
        .output()
        .expect("spawn amr");
    assert!(!output.status.success());
}

#[test]
fn ama_validate_literal_divisor_grows_harmonically() {
    let tmp = tempfile::tempdir().unwrap();
    let exact = tmp.path().join("exact.csv");
    let literal = tmp.path().join("literal.csv");
    run_ok(&[
        "ama-validate",
        "--checkpoints",
        "100",
        "--seed",
        "3",
        "--out",
        exact.to_str().unwrap(),
    ]);
    run_ok(&[
        "ama-validate",
        "--checkpoints",
        "100",
        "--seed",
        "3",
        "--literal-index-divisor",
        "--out",
        literal.to_str().unwrap(),
    ]);
    let eps = |path: &Path| -> f64 {
        let text = fs::read_to_string(path).unwrap();
        text.lines()
            .nth(1)
            .unwrap()
            .split(',')
            .nth(4)
            .unwrap()
            .parse()
            .unwrap()
    };
    let harmonic: f64 = (1..=100).map(|j| 1.0 / j as f64).sum();
    assert!(eps(&exact) < 1e-10);
    let literal_eps = eps(&literal);
    let expect = (harmonic - 1.0) * 100.0;
    assert!(
        (literal_eps - expect).abs() <= 1e-6 * expect,
        "literal mode eps {literal_eps} vs harmonic prediction {expect}"
    );
}

#[test]
fn theory_check_is_deterministic_and_validates_trials() {
    let tmp = tempfile::tempdir().unwrap();
    let out_a = tmp.path().join("a.json");
    let out_b = tmp.path().join("b.json");
    for out in [&out_a, &out_b] {
        run_ok(&[
            "theory-check",
            "--trials",
            "25",
            "--seed",
            "11",
            "--out",
            out.to_str().unwrap(),
        ]);
    }
    assert_eq!(
        fs::read(&out_a).unwrap(),
        fs::read(&out_b).unwrap(),
        "theory-check output must be byte-identical for a fixed seed"
    );
    let err = run_err(&["theory-check", "--trials", "0"]);
    assert!(err.contains("trials"), "unexpected message: {err}");
}

/// One small dataset plus a run config; returns (run config, output dir).
fn small_run(tmp: &Path) -> (PathBuf, PathBuf) {
    let mut csv = String::from("x1,x2,y\n");
    let mut state = 1u64;
    let mut next = || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    for _ in 0..20 {
        let a = 0.5 + 9.0 * next();
        let b = 0.5 + 9.0 * next();
        let y = 2.0 * a + 0.7 * b + (next() - 0.5);
        csv.push_str(&format!("{a:.5},{b:.5},{y:.5}\n"));
    }
    fs::write(tmp.join("tiny.csv"), csv).unwrap();
    fs::write(
        tmp.join("tiny.conf"),
        "path = tiny.csv\ntarget = y\ncfs = false\n",
    )
    .unwrap();
    fs::write(
        tmp.join("run.conf"),
        "datasets = tiny.conf\nalgorithms = amr,knn\nseed = 4\noutput_dir = out\nn_perm = 500\n",
    )
    .unwrap();
    (tmp.join("run.conf"), tmp.join("out"))
}

#[test]
fn evaluate_rejects_unknown_algorithms() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("d.conf"), "path = d.csv\n").unwrap();
    fs::write(
        tmp.path().join("run.conf"),
        "datasets = d.conf\nalgorithms = amr,svr\n",
    )
    .unwrap();
    let err = run_err(&[
        "evaluate",
        "--config",
        tmp.path().join("run.conf").to_str().unwrap(),
    ]);
    assert!(
        err.contains("unknown algorithm"),
        "unexpected message: {err}"
    );
}

#[test]
fn evaluate_continues_past_a_broken_dataset_but_fails_overall() {
    let tmp = tempfile::tempdir().unwrap();
    let (run_conf, out_dir) = small_run(tmp.path());
    // add a dataset whose file is missing
    fs::write(tmp.path().join("ghost.conf"), "path = nowhere.csv\n").unwrap();
    fs::write(
        &run_conf,
        "datasets = ghost.conf,tiny.conf\nalgorithms = knn\nseed = 4\noutput_dir = out\n",
    )
    .unwrap();
    let output = amr_command()
        .args(["evaluate", "--config", run_conf.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(
        !output.status.success(),
        "run with a broken dataset must fail"
    );
    // the healthy dataset was still evaluated
    assert!(out_dir.join("tiny/knn_metrics.json").exists());
}

#[test]
fn compare_workflow() {
    let tmp = tempfile::tempdir().unwrap();
    let (run_conf, out_dir) = small_run(tmp.path());
    run_ok(&["evaluate", "--config", run_conf.to_str().unwrap()]);
    let pred_dir = out_dir.join("tiny");

    // an algorithm compared with itself is Similar with p = 1
    let stdout = run_ok(&[
        "compare",
        "--pred-dir",
        pred_dir.to_str().unwrap(),
        "--pair",
        "amr,amr",
        "--seed",
        "8",
    ]);
    assert!(
        stdout.contains("Similar"),
        "self-comparison verdict: {stdout}"
    );
    let report: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(pred_dir.join("compare_amr_vs_amr.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["perm"]["dif_obs"].as_f64().unwrap(), 0.0);
    assert_eq!(report["perm"]["p_value"].as_f64().unwrap(), 1.0);

    // external predictions imported as a CSV take part like any algorithm
    let actuals = fs::read_to_string(pred_dir.join("actuals.csv")).unwrap();
    let mut external = String::from("row_index,prediction\n");
    for line in actuals.lines().skip(1) {
        let (idx, actual) = line.split_once(',').unwrap();
        let skewed: f64 = actual.parse::<f64>().unwrap() + 3.0;
        external.push_str(&format!("{idx},{skewed}\n"));
    }
    fs::write(pred_dir.join("external_predictions.csv"), external).unwrap();
    let stdout = run_ok(&[
        "compare",
        "--pred-dir",
        pred_dir.to_str().unwrap(),
        "--pair",
        "amr,external",
        "--seed",
        "8",
    ]);
    assert!(stdout.contains("amr vs external"));

    // mismatched row counts are rejected
    fs::write(
        pred_dir.join("short_predictions.csv"),
        "row_index,prediction\n0,1.0\n",
    )
    .unwrap();
    let err = run_err(&[
        "compare",
        "--pred-dir",
        pred_dir.to_str().unwrap(),
        "--pair",
        "amr,short",
    ]);
    assert!(
        err.contains("row count mismatch"),
        "unexpected message: {err}"
    );

    // missing predictions are called out
    let err = run_err(&[
        "compare",
        "--pred-dir",
        pred_dir.to_str().unwrap(),
        "--pair",
        "amr,absent",
    ]);
    assert!(
        err.contains("missing predictions"),
        "unexpected message: {err}"
    );
}

#[test]
fn report_requires_an_existing_output_directory() {
    let err = run_err(&["report", "--out", "/nonexistent-path-for-sure"]);
    assert!(err.contains("cannot list"), "unexpected message: {err}");
}

#[test]
fn report_tables_carry_metric_values_bit_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let (run_conf, out_dir) = small_run(tmp.path());
    run_ok(&["evaluate", "--config", run_conf.to_str().unwrap()]);
    run_ok(&[
        "report",
        "--algorithms",
        "amr,knn",
        "--seed",
        "4",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    let metrics = fs::read_to_string(out_dir.join("tiny/amr_metrics.json")).unwrap();
    let json_mae = metrics
        .lines()
        .find(|l| l.contains("\"mae\""))
        .and_then(|l| l.split(':').nth(1))
        .map(|v| v.trim().trim_end_matches(',').to_string())
        .unwrap();
    let table = fs::read_to_string(out_dir.join("mae.csv")).unwrap();
    let cell = table.lines().nth(1).unwrap().split(',').nth(1).unwrap();
    assert_eq!(
        cell, json_mae,
        "table cell must reproduce the JSON value verbatim"
    );
}

#[test]
fn grid_json_carries_the_canonical_field_names() {
    let tmp = tempfile::tempdir().unwrap();
    let (run_conf, out_dir) = small_run(tmp.path());
    run_ok(&["evaluate", "--config", run_conf.to_str().unwrap()]);
    let text = fs::read_to_string(out_dir.join("tiny/amr_grid.json")).unwrap();
    let expected = [
        "mae_op",
        "mse_op",
        "rmse_op",
        "r2_op",
        "alpha_op",
        "beta_op",
        "delta_op",
        "k_op",
        "et_seconds",
    ];
    let positions: Vec<usize> = expected
        .iter()
        .map(|k| {
            text.find(&format!("\"{k}\""))
                .unwrap_or_else(|| panic!("missing field {k}"))
        })
        .collect();
    assert!(
        positions.windows(2).all(|w| w[0] < w[1]),
        "field order drifted"
    );
    let grid: serde_json::Value = serde_json::from_str(&text).unwrap();
    let object = grid.as_object().unwrap();
    assert_eq!(object.len(), expected.len(), "unexpected extra fields");
    let alpha = object["alpha_op"].as_f64().unwrap();
    let beta = object["beta_op"].as_f64().unwrap();
    assert_eq!(alpha + beta, 1.0);
}
