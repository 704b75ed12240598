use std::path::PathBuf;

use volmetrics::arima::{fit_arima, ArimaSpec};
use volmetrics::data::{load_csv, log_returns};
use volmetrics::garch::{fit_garch_with_cap, GarchSpec};
use volmetrics::pipeline::{run_pipeline, InputConfig, PipelineConfig};

fn sample_csv() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/sample/indices.csv")
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

#[test]
fn report_numbers_match_direct_library_calls() {
    let dir = tempfile::tempdir().unwrap();
    let mut input = InputConfig::new(sample_csv());
    input.value_column = Some("index_b".into());
    input.label = Some("index_b".into());
    let config = PipelineConfig {
        inputs: vec![input],
        p_max: 2,
        q_max: 2,
        d_values: vec![0],
        garch_models: vec![GarchSpec::garch(1, 1), GarchSpec::arch(1)],
        output_dir: dir.path().to_path_buf(),
        ..PipelineConfig::default()
    };
    let report = run_pipeline(&config).unwrap();
    assert!(report.mgarch.is_none());

    let text = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(json["versions"]["schema"], 1);

    let levels = load_csv(sample_csv(), "date", "index_b").unwrap();
    let returns = log_returns(&levels).unwrap();
    let spec: ArimaSpec = report.arima.best_by_bic;
    let arima = fit_arima(&returns, spec).unwrap();
    let reported = &json["arima"]["selected"];
    assert!(close(reported["loglik"].as_f64().unwrap(), arima.loglik));
    for (i, e) in arima.estimates.iter().enumerate() {
        assert!(close(reported["estimates"][i].as_f64().unwrap(), *e));
    }

    let garch_spec = report.garch.selected;
    let garch = fit_garch_with_cap(&arima.residuals, garch_spec, config.garch_order_cap).unwrap();
    let summary = report.garch.fits.iter().find(|f| f.spec == garch_spec).unwrap();
    assert!(close(summary.criteria.loglik, garch.loglik));
    assert!(close(summary.criteria.aic_per_obs, garch.criteria().aic_per_obs));
    for (a, b) in summary.estimates.iter().zip(&garch.estimates) {
        assert!(close(*a, *b));
    }

    for name in ["returns_index_b.csv", "arima_forecast.csv", "garch_sigma2.csv"] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
    assert_eq!(report.forecasts.arima.horizon, config.arima_horizon);
}

#[test]
fn unknown_config_fields_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("config.json");
    std::fs::write(&path, r#"{"inputs": [{"path": "x.csv"}], "p_mx": 3}"#).unwrap();
    assert!(PipelineConfig::from_json_file(&path).is_err());
}
