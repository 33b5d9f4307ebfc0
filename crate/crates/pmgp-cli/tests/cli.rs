//! End-to-end tests of the `pmgp` binary: exit codes, report files, and
//! byte-level determinism across reruns.

use std::path::Path;
use std::process::{Command, Output};

fn pmgp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pmgp"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn write_csv(dir: &Path, name: &str, content: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path.to_string_lossy().into_owned()
}

fn wavy_csv(dir: &Path, n: usize) -> String {
    let mut content = String::from("t,y\n");
    for i in 0..n {
        let t = i as f64 / 12.0;
        let y = 10.0 + 2.0 * t + (std::f64::consts::TAU * t).sin();
        content.push_str(&format!("{t},{y}\n"));
    }
    write_csv(dir, "wavy.csv", &content)
}

#[test]
fn benchmark_succeeds_and_writes_both_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let input = wavy_csv(dir.path(), 36);
    let report = dir.path().join("report.json");
    let curves = dir.path().join("curves.csv");

    let out = pmgp(&[
        "benchmark",
        "--input",
        &input,
        "--out",
        report.to_str().unwrap(),
        "--plot-data",
        curves.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let models = parsed["models"].as_array().unwrap();
    assert_eq!(models.len(), 5);
    assert_eq!(models[0]["model"], "pmgp");
    assert!(models[0]["nmae"].as_f64().unwrap().is_finite());

    let curve_text = std::fs::read_to_string(&curves).unwrap();
    assert!(curve_text.starts_with("step,model,running_nmae\n"));
    assert_eq!(curve_text.lines().count(), 1 + 5 * 35);
}

#[test]
fn forecast_report_goes_to_stdout_by_default() {
    let dir = tempfile::tempdir().unwrap();
    let input = wavy_csv(dir.path(), 24);
    let out = pmgp(&["forecast", "--input", &input, "--horizon", "3", "--fs", "12"]);
    assert!(out.status.success());
    let parsed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(parsed["model"], "pmgp");
    assert_eq!(parsed["future"].as_array().unwrap().len(), 3);
    assert!(parsed["runtime_ms"].is_null(), "timing off by default");
}

#[test]
fn loglik_agrees_between_filter_and_dense() {
    let dir = tempfile::tempdir().unwrap();
    let input = wavy_csv(dir.path(), 20);
    let filt = pmgp(&["loglik", "--input", &input, "--components", "2"]);
    let dense = pmgp(&["loglik", "--input", &input, "--components", "2", "--exact"]);
    assert!(filt.status.success() && dense.status.success());
    let a: serde_json::Value = serde_json::from_slice(&filt.stdout).unwrap();
    let b: serde_json::Value = serde_json::from_slice(&dense.stdout).unwrap();
    assert_eq!(a["method"], "filter");
    assert_eq!(b["method"], "dense");
    let (va, vb) = (a["loglik"].as_f64().unwrap(), b["loglik"].as_f64().unwrap());
    assert!((va - vb).abs() <= 1e-8 * (1.0 + vb.abs()), "{va} vs {vb}");
}

#[test]
fn sweep_tabulates_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let input = wavy_csv(dir.path(), 24);
    let out = pmgp(&[
        "sweep", "--input", &input, "--param", "c", "--values", "1,100",
    ]);
    assert!(out.status.success());
    let parsed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(parsed["param"], "c");
    let results = parsed["results"].as_array().unwrap();
    assert_eq!(results.len(), 2);
    assert_eq!(results[0]["value"].as_f64().unwrap(), 1.0);
    assert!(results[0]["nmae"].as_f64().unwrap().is_finite());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let input = wavy_csv(dir.path(), 30);
    let r1 = dir.path().join("r1.json");
    let r2 = dir.path().join("r2.json");
    let c1 = dir.path().join("c1.csv");
    let c2 = dir.path().join("c2.csv");
    for (r, c) in [(&r1, &c1), (&r2, &c2)] {
        let out = pmgp(&[
            "benchmark",
            "--input",
            &input,
            "--out",
            r.to_str().unwrap(),
            "--plot-data",
            c.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    assert_eq!(std::fs::read(&r1).unwrap(), std::fs::read(&r2).unwrap());
    assert_eq!(std::fs::read(&c1).unwrap(), std::fs::read(&c2).unwrap());
}

#[test]
fn missing_input_exits_2() {
    let out = pmgp(&["benchmark", "--input", "/nonexistent/series.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn malformed_csv_exits_2_and_names_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_csv(dir.path(), "bad.csv", "t,y\n0.0,1.0\n0.5,huh\n");
    let out = pmgp(&["forecast", "--input", &input]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 3"));
}

#[test]
fn out_of_order_rows_exit_2_and_name_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_csv(
        dir.path(),
        "disorder.csv",
        "t,y\n0.0,1.0\n1.0,2.0\n0.5,3.0\n2.0,4.0\n",
    );
    let out = pmgp(&["benchmark", "--input", &input]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("row 4"), "stderr: {stderr}");
}

#[test]
fn constant_series_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_csv(dir.path(), "flat.csv", "t,y\n0,5\n1,5\n2,5\n3,5\n");
    let out = pmgp(&["forecast", "--input", &input]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("degenerate"));
}

#[test]
fn unknown_model_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let input = wavy_csv(dir.path(), 12);
    let out = pmgp(&["benchmark", "--input", &input, "--models", "pmgp,arima"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_flag_value_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let input = wavy_csv(dir.path(), 12);
    let out = pmgp(&["forecast", "--input", &input, "--c", "-5"]);
    assert_eq!(out.status.code(), Some(2));
    let out = pmgp(&["forecast", "--input", &input, "--trend", "cubic"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn benchmark_isolates_a_failing_model() {
    // An AR(25) baseline is fine on 30 points, and pmgp runs regardless;
    // force a pmgp failure via an absurd fs that breaks nothing… instead,
    // check the isolation contract directly: a constant series fails
    // every model (NMAE undefined), yet the benchmark itself exits 0
    // with one error entry per model.
    let dir = tempfile::tempdir().unwrap();
    let input = write_csv(dir.path(), "flat.csv", "t,y\n0,5\n1,5\n2,5\n3,5\n");
    let out = pmgp(&["benchmark", "--input", &input, "--models", "pmgp,pa-ar2"]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let parsed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let models = parsed["models"].as_array().unwrap();
    assert_eq!(models.len(), 2);
    for entry in models {
        assert!(entry["error"].is_string(), "entry: {entry}");
        assert!(entry.get("nmae").is_none());
    }
}
