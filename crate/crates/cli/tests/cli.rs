use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_volmetrics"));
    c.env_remove("VOLMETRICS_OUTPUT_DIR");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn sample_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/sample")
}

fn simulated_levels(dir: &Path) -> PathBuf {
    let o = run(&[
        "simulate", "garch", "--omega", "5.3e-5", "--alpha", "0.12", "--beta", "0.83", "--n", "600", "--seed", "3",
        "--levels", "100",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let path = dir.join("levels.csv");
    std::fs::write(&path, &o.stdout).unwrap();
    path
}

fn value_column(csv: &Path) -> String {
    let text = std::fs::read_to_string(csv).unwrap();
    text.lines().next().unwrap().split(',').nth(1).unwrap().to_string()
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let args = [
        "simulate", "arima", "--ar", "0.5", "--ma", "-0.2", "--n", "50", "--seed", "11",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(stdout(&a).lines().count(), 51);
    let c = run(&[
        "simulate", "arima", "--ar", "0.5", "--ma", "-0.2", "--n", "50", "--seed", "12",
    ]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn analysis_subcommands_emit_json() {
    let dir = tempfile::tempdir().unwrap();
    let csv = simulated_levels(dir.path());
    let col = value_column(&csv);
    let input = csv.to_str().unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["stats"],
        vec!["test"],
        vec!["fit-arima", "--p", "1", "--q", "1"],
        vec!["select-arima", "--pmax", "1", "--qmax", "1", "--d", "0"],
        vec![
            "fit-garch",
            "--family",
            "garch",
            "--p",
            "1",
            "--q",
            "1",
            "--innovation",
            "student_t",
        ],
    ];
    for case in cases {
        let mut args = case.clone();
        args.extend(["--input", input, "--value-column", &col]);
        let o = run(&args);
        assert!(o.status.success(), "{case:?}: {}", String::from_utf8_lossy(&o.stderr));
        let _: Value = serde_json::from_str(&stdout(&o)).unwrap_or_else(|e| panic!("{case:?}: {e}"));
    }
}

#[test]
fn forecast_writes_requested_horizon() {
    let dir = tempfile::tempdir().unwrap();
    let csv = simulated_levels(dir.path());
    let col = value_column(&csv);
    let o = run(&[
        "forecast",
        "--input",
        csv.to_str().unwrap(),
        "--value-column",
        &col,
        "--arima",
        "1,0,0",
        "--h",
        "7",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().count(), 8);
}

#[test]
fn fit_dcc_on_two_series() {
    let sample = sample_dir().join("indices.csv");
    let a = format!("{}", sample.display());
    let o = run(&["fit-dcc", "--input", &a, "--input", &a, "--value-column", "index_a"]);
    if o.status.success() {
        let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
        assert!(v.is_object());
    } else {
        assert_eq!(o.status.code(), Some(4));
    }
}

#[test]
fn missing_input_exits_3_and_names_path() {
    let o = run(&["stats", "--input", "/nonexistent/prices.csv"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/prices.csv"));
}

#[test]
fn bad_arguments_exit_2() {
    assert_eq!(run(&["fit-arima", "--p", "minus-one"]).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
    let o = run(&["simulate", "garch", "--omega", "-1", "--alpha", "0.1", "--n", "10"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn run_honors_output_dir_env() {
    let dir = tempfile::tempdir().unwrap();
    let csv = simulated_levels(dir.path());
    let col = value_column(&csv);
    let cfg = dir.path().join("config.json");
    std::fs::write(
        &cfg,
        format!(
            r#"{{"inputs": [{{"path": "levels.csv"}}], "value_column": "{col}", "p_max": 1, "q_max": 1, "d_values": [0],
               "garch_models": [{{"family": "garch", "p": 1, "q": 1, "innovation": "normal"}}]}}"#
        ),
    )
    .unwrap();
    let out = dir.path().join("from_env");
    let o = bin()
        .args(["run", "--config", cfg.to_str().unwrap()])
        .env("VOLMETRICS_OUTPUT_DIR", &out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("report.json").exists());
    assert!(out.join("arima_forecast.csv").exists());
}

fn assert_close(path: &str, got: &Value, want: &Value) {
    match (got, want) {
        (Value::Number(g), Value::Number(w)) => {
            let (g, w) = (g.as_f64().unwrap(), w.as_f64().unwrap());
            assert!((g - w).abs() <= 1e-6 * (1.0 + w.abs()), "{path}: {g} vs {w}");
        }
        (Value::Array(g), Value::Array(w)) => {
            assert_eq!(g.len(), w.len(), "{path}: length");
            for (i, (a, b)) in g.iter().zip(w).enumerate() {
                assert_close(&format!("{path}[{i}]"), a, b);
            }
        }
        (Value::Object(g), Value::Object(w)) => {
            let gk: Vec<_> = g.keys().collect();
            let wk: Vec<_> = w.keys().collect();
            assert_eq!(gk, wk, "{path}: keys");
            for (k, v) in w {
                assert_close(&format!("{path}.{k}"), &g[k], v);
            }
        }
        _ => assert_eq!(got, want, "{path}"),
    }
}

#[test]
fn sample_report_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "run",
        "--config",
        sample_dir().join("config.json").to_str().unwrap(),
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let got: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let golden = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/report.json");
    let want: Value = serde_json::from_str(&std::fs::read_to_string(golden).unwrap()).unwrap();
    assert_close("$", &got, &want);
}
