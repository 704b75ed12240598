//! End-to-end run: load levels, transform to log returns, test, select and
//! fit the ARIMA mean, fit the variance models on its residuals, fit DCC on
//! several series, forecast, and write `report.json` plus plot-data CSVs.

use std::fmt;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arima::{
    arima_diagnostics, fit_arima, forecast_arima, select_arima, ArimaFit, ArimaSpec, ForecastResult, LjungBoxPoint,
    SelectionRow, MAX_ARMA_ORDER, MAX_DIFFERENCE,
};
use crate::data::{
    descriptive_stats, histogram_data, load_csv, log_returns, qq_data, write_dated_csv, DescriptiveStats, ReturnSeries,
};
use crate::garch::{
    fit_garch_with_cap, forecast_variance, garch_diagnostics, GarchCriteria, GarchFit, GarchSpec, Innovation,
    VarianceForecast, MAX_GARCH_ORDER,
};
use crate::hypothesis::{
    adf_test, arch_lm_test, default_adf_lags, default_ljung_box_lags, kpss_test, ljung_box, AdfDeterministic,
    TestResult,
};
use crate::mgarch::{
    dcc_diagnostics, dcc_forecast, fit_ccc, fit_dcc, write_correlation_csv, write_volatility_csv, DccForecast,
    MultiSeries,
};
use crate::optim::FitFlag;
use crate::stats::{acf, ks_test, pacf, KsResult, Reference};
use crate::Error;

pub const SCHEMA_VERSION: u32 = 1;
/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "VOLMETRICS_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub path: PathBuf,
    /// Defaults to the file stem.
    #[serde(default)]
    pub label: Option<String>,
    /// Overrides the global value column.
    #[serde(default)]
    pub value_column: Option<String>,
}

impl InputConfig {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            label: None,
            value_column: None,
        }
    }

    fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| {
            self.path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "series".into())
        })
    }
}

fn default_garch_models() -> Vec<GarchSpec> {
    vec![
        GarchSpec::arch(1),
        GarchSpec::arch(2),
        GarchSpec::garch(1, 1),
        GarchSpec::garch(1, 2),
        GarchSpec::garch(2, 1),
        GarchSpec::garch(2, 2),
        GarchSpec::garch(1, 1).with_innovation(Innovation::StudentT),
        GarchSpec::egarch(1, 1),
    ]
}

/// Pipeline settings. Every field except `inputs` has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// The first input drives the univariate stages; two or more add DCC.
    pub inputs: Vec<InputConfig>,
    pub date_column: String,
    pub value_column: String,
    pub p_max: usize,
    pub q_max: usize,
    pub d_values: Vec<usize>,
    pub garch_models: Vec<GarchSpec>,
    pub garch_order_cap: usize,
    pub arima_horizon: usize,
    pub dcc_horizon: usize,
    pub max_lag: usize,
    pub histogram_bins: usize,
    /// Not part of the report.
    #[serde(skip_serializing)]
    pub output_dir: PathBuf,
    /// Recorded in the report; every current stage is deterministic.
    pub seed: u64,
    /// Relative input paths are resolved against this directory.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            inputs: Vec::new(),
            date_column: "date".into(),
            value_column: "price".into(),
            p_max: 5,
            q_max: 5,
            d_values: vec![0, 1],
            garch_models: default_garch_models(),
            garch_order_cap: MAX_GARCH_ORDER,
            arima_horizon: 30,
            dcc_horizon: 100,
            max_lag: 20,
            histogram_bins: 30,
            output_dir: std::env::var_os(OUTPUT_DIR_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("output")),
            seed: 0,
            base_dir: PathBuf::new(),
        }
    }
}

impl PipelineConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| {
            PipelineError::new(
                Stage::Config,
                Error::Io {
                    path: path.to_path_buf(),
                    source,
                },
            )
        })?;
        let mut config: Self = serde_json::from_str(&text).map_err(|e| {
            PipelineError::new(
                Stage::Config,
                Error::InvalidArgument(format!("{}: {e}", path.display())),
            )
        })?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let fail = |m: String| Err(PipelineError::new(Stage::Config, Error::InvalidArgument(m)));
        if self.inputs.is_empty() {
            return fail("at least one input is required".into());
        }
        if self.arima_horizon == 0 || self.dcc_horizon == 0 {
            return fail("forecast horizons must be at least 1".into());
        }
        if self.p_max > MAX_ARMA_ORDER || self.q_max > MAX_ARMA_ORDER {
            return fail(format!("p_max and q_max are capped at {MAX_ARMA_ORDER}"));
        }
        if self.d_values.is_empty() || self.d_values.iter().any(|&d| d > MAX_DIFFERENCE) {
            return fail(format!("d_values must be non-empty and at most {MAX_DIFFERENCE}"));
        }
        if self.garch_models.is_empty() {
            return fail("at least one GARCH model is required".into());
        }
        for spec in &self.garch_models {
            spec.validate_with_cap(self.garch_order_cap)
                .map_err(|e| PipelineError::new(Stage::Config, e))?;
        }
        if self.max_lag == 0 || self.histogram_bins == 0 {
            return fail("max_lag and histogram_bins must be positive".into());
        }
        let mut labels: Vec<String> = self.inputs.iter().map(InputConfig::label).collect();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return fail("input labels must be distinct".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    Data,
    Tests,
    Arima,
    Garch,
    Mgarch,
    Forecast,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Config => "config",
            Stage::Data => "data",
            Stage::Tests => "tests",
            Stage::Arima => "arima",
            Stage::Garch => "garch",
            Stage::Mgarch => "mgarch",
            Stage::Forecast => "forecast",
            Stage::Output => "output",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
#[error("{stage} stage: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

impl PipelineError {
    pub fn new(stage: Stage, source: Error) -> Self {
        Self { stage, source }
    }

    /// 2 for configuration and output problems, 3 for data, 4 for estimation.
    pub fn exit_code(&self) -> i32 {
        match self.stage {
            Stage::Config | Stage::Output => 2,
            Stage::Data => 3,
            _ => 4,
        }
    }
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, PipelineError>;
}

impl<T> AtStage<T> for crate::Result<T> {
    fn at(self, stage: Stage) -> Result<T, PipelineError> {
        self.map_err(|e| PipelineError::new(stage, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesSummary {
    pub label: String,
    pub levels: usize,
    pub first_date: NaiveDate,
    pub last_date: NaiveDate,
    pub returns: DescriptiveStats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestsSection {
    pub series: String,
    pub adf: TestResult,
    pub kpss: TestResult,
    pub ljung_box_returns: TestResult,
    pub ljung_box_squared_returns: TestResult,
    pub ks_normal_returns: KsResult,
    pub arch_lm_arima_residuals: TestResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArimaSummary {
    pub spec: ArimaSpec,
    pub param_names: Vec<String>,
    pub estimates: Vec<f64>,
    pub se: Vec<f64>,
    pub sigma2: f64,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    pub n: usize,
    pub flags: Vec<FitFlag>,
}

impl ArimaSummary {
    pub fn from_fit(fit: &ArimaFit) -> Self {
        let c = fit.criteria();
        Self {
            spec: fit.spec,
            param_names: fit.param_names.clone(),
            estimates: fit.estimates.clone(),
            se: fit.se.clone(),
            sigma2: fit.sigma2,
            loglik: fit.loglik,
            aic: c.aic,
            bic: c.bic,
            n: fit.n_effective,
            flags: fit.flags.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArimaSection {
    pub selection: Vec<SelectionRow>,
    pub skipped: Vec<(ArimaSpec, String)>,
    pub best_by_aic: ArimaSpec,
    pub best_by_bic: ArimaSpec,
    pub selected: ArimaSummary,
    pub ljung_box: Vec<LjungBoxPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GarchSummary {
    pub spec: GarchSpec,
    pub label: String,
    pub param_names: Vec<String>,
    pub estimates: Vec<f64>,
    pub se: Vec<f64>,
    pub tstats: Vec<f64>,
    pub criteria: GarchCriteria,
    pub unconditional_variance: Option<f64>,
    pub flags: Vec<FitFlag>,
}

impl GarchSummary {
    pub fn from_fit(fit: &GarchFit) -> Self {
        Self {
            spec: fit.spec,
            label: fit.spec.to_string(),
            param_names: fit.param_names.clone(),
            estimates: fit.estimates.clone(),
            se: fit.se.clone(),
            tstats: fit.tstats.clone(),
            criteria: fit.criteria(),
            unconditional_variance: fit.unconditional_variance(),
            flags: fit.flags.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GarchSection {
    pub fits: Vec<GarchSummary>,
    pub failed: Vec<(GarchSpec, String)>,
    /// Lowest per-observation AIC.
    pub selected: GarchSpec,
    pub ljung_box_z: TestResult,
    pub ljung_box_z2: TestResult,
    pub ks: KsResult,
    pub reference: Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SquaredLjungBox {
    pub label: String,
    pub before: TestResult,
    pub after: TestResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MgarchSection {
    pub labels: Vec<String>,
    pub n: usize,
    pub first_date: NaiveDate,
    pub last_date: NaiveDate,
    pub univariate: Vec<GarchSummary>,
    pub a: f64,
    pub b: f64,
    pub se: Vec<f64>,
    pub tstats: Vec<f64>,
    pub s: Vec<Vec<f64>>,
    pub correlation_loglik: f64,
    pub loglik: f64,
    pub flags: Vec<FitFlag>,
    pub ccc_correlation: Vec<Vec<f64>>,
    pub ccc_loglik: f64,
    pub squared_residual_ljung_box: Vec<SquaredLjungBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForecastSection {
    pub arima: ForecastResult,
    pub garch_variance: VarianceForecast,
    /// ARIMA point forecast with `±2·σ(h)` from the selected variance model.
    pub combined: ForecastResult,
    pub dcc: Option<DccForecast>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Versions {
    pub schema: u32,
    pub volmetrics: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub config: PipelineConfig,
    pub data_summary: Vec<SeriesSummary>,
    pub tests: TestsSection,
    pub arima: ArimaSection,
    pub garch: GarchSection,
    pub mgarch: Option<MgarchSection>,
    pub forecasts: ForecastSection,
    pub versions: Versions,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn file_label(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect()
}

struct Output<'a> {
    dir: &'a Path,
    written: Vec<String>,
}

impl Output<'_> {
    fn write(
        &mut self,
        name: &str,
        f: impl FnOnce(BufWriter<fs::File>) -> crate::Result<()>,
    ) -> Result<(), PipelineError> {
        let path = self.dir.join(name);
        let file = fs::File::create(&path)
            .map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })
            .at(Stage::Output)?;
        f(BufWriter::new(file)).at(Stage::Output)?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn rows(&mut self, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<(), PipelineError> {
        self.write(name, |out| {
            let mut w = csv::Writer::from_writer(out);
            let err = |e: csv::Error| Error::Numerical(format!("csv write: {e}"));
            w.write_record(header).map_err(err)?;
            for r in rows {
                w.write_record(r).map_err(err)?;
            }
            w.flush().map_err(|e| Error::Numerical(format!("csv write: {e}")))
        })
    }
}

/// Runs every stage and writes the report bundle to `config.output_dir`.
pub fn run_pipeline(config: &PipelineConfig) -> Result<Report, PipelineError> {
    config.validate()?;
    fs::create_dir_all(&config.output_dir)
        .map_err(|source| Error::Io {
            path: config.output_dir.clone(),
            source,
        })
        .at(Stage::Output)?;
    let mut out = Output {
        dir: &config.output_dir,
        written: Vec::new(),
    };

    // data
    let mut returns = Vec::with_capacity(config.inputs.len());
    let mut data_summary = Vec::with_capacity(config.inputs.len());
    for input in &config.inputs {
        let label = input.label();
        let column = input.value_column.as_deref().unwrap_or(&config.value_column);
        let levels = load_csv(config.base_dir.join(&input.path), &config.date_column, column).at(Stage::Data)?;
        let r = log_returns(&levels).at(Stage::Data)?;
        let r = ReturnSeries::new(r.dates().to_vec(), r.values().to_vec(), label.clone()).at(Stage::Data)?;
        data_summary.push(SeriesSummary {
            label: label.clone(),
            levels: levels.len(),
            first_date: levels.dates()[0],
            last_date: *levels.dates().last().expect("non-empty"),
            returns: descriptive_stats(r.values()).at(Stage::Data)?,
        });
        let fl = file_label(&label);
        out.write(&format!("returns_{fl}.csv"), |w| r.write_csv(w))?;
        returns.push(r);
    }
    let primary = &returns[0];
    let x = primary.values();
    let hist = histogram_data(x, config.histogram_bins).at(Stage::Data)?;
    out.rows(
        "histogram.csv",
        &["lower", "upper", "center", "count", "density"],
        hist.bins
            .iter()
            .map(|b| {
                vec![
                    b.lower.to_string(),
                    b.upper.to_string(),
                    b.center.to_string(),
                    b.count.to_string(),
                    b.density.to_string(),
                ]
            })
            .collect(),
    )?;
    out.rows(
        "histogram_normal_overlay.csv",
        &["x", "density"],
        hist.normal_overlay
            .iter()
            .map(|(a, b)| vec![a.to_string(), b.to_string()])
            .collect(),
    )?;
    let qq = qq_data(x, &Reference::STANDARD_NORMAL, true).at(Stage::Data)?;
    write_pairs(&mut out, "qq_returns.csv", &qq)?;

    // tests
    let max_lag = config.max_lag.min(x.len().saturating_sub(1)).max(1);
    let r_acf = acf(x, max_lag).at(Stage::Tests)?;
    let r_pacf = pacf(x, max_lag).at(Stage::Tests)?;
    out.write("acf_returns.csv", |w| r_acf.write_csv(w))?;
    out.write("pacf_returns.csv", |w| r_pacf.write_csv(w))?;
    let sq: Vec<f64> = x.iter().map(|v| v * v).collect();
    out.write("acf_squared_returns.csv", |w| acf(&sq, max_lag)?.write_csv(w))?;
    let lb_lags = default_ljung_box_lags(x.len());
    let adf = adf_test(x, default_adf_lags(x.len()), AdfDeterministic::Constant).at(Stage::Tests)?;
    let kpss = kpss_test(x).at(Stage::Tests)?;
    let ljung_box_returns = ljung_box(x, lb_lags, 0).at(Stage::Tests)?;
    let ljung_box_squared_returns = ljung_box(&sq, lb_lags, 0).at(Stage::Tests)?;
    let ks_normal_returns = {
        let s = descriptive_stats(x).at(Stage::Tests)?;
        ks_test(x, &Reference::Normal { mean: s.mean, sd: s.sd }).at(Stage::Tests)?
    };

    // arima
    let table = select_arima(primary, config.p_max, &config.d_values, config.q_max).at(Stage::Arima)?;
    let arima_fit = fit_arima(primary, table.best_by_bic).at(Stage::Arima)?;
    let diag_lag = max_lag.max(arima_fit.spec.p + arima_fit.spec.q + 1);
    let adiag = arima_diagnostics(&arima_fit, diag_lag).at(Stage::Arima)?;
    out.write("arima_std_residuals.csv", |w| {
        write_dated_csv(w, "value", &arima_fit.dates, &adiag.standardized_residuals)
    })?;
    out.write("arima_residual_acf.csv", |w| adiag.residual_acf.write_csv(w))?;
    out.rows(
        "arima_ljung_box.csv",
        &["lag", "statistic", "p_value"],
        adiag
            .ljung_box
            .iter()
            .map(|p| {
                vec![
                    p.lag.to_string(),
                    p.statistic.to_string(),
                    p.p_value.map(|v| v.to_string()).unwrap_or_default(),
                ]
            })
            .collect(),
    )?;
    let arch_lm = arch_lm_test(&arima_fit.residuals, lb_lags).at(Stage::Tests)?;

    // garch
    let resid = &arima_fit.residuals;
    let mut fits: Vec<GarchFit> = Vec::new();
    let mut failed = Vec::new();
    let attempts: Vec<_> = {
        use rayon::prelude::*;
        config
            .garch_models
            .par_iter()
            .map(|&spec| (spec, fit_garch_with_cap(resid, spec, config.garch_order_cap)))
            .collect()
    };
    for (spec, r) in attempts {
        match r {
            Ok(f) => fits.push(f),
            Err(e) => {
                log::warn!("{spec}: {e}");
                failed.push((spec, e.to_string()));
            }
        }
    }
    let best = fits
        .iter()
        .filter(|f| f.converged)
        .min_by(|a, b| a.criteria().aic_per_obs.total_cmp(&b.criteria().aic_per_obs))
        .or_else(|| fits.first())
        .ok_or_else(|| PipelineError::new(Stage::Garch, Error::AllFitsFailed(config.garch_models.len())))?;
    let gdiag = garch_diagnostics(best, max_lag.min(resid.len() - 1)).at(Stage::Garch)?;
    out.write("garch_sigma2.csv", |w| best.write_variance_csv(&arima_fit.dates, w))?;
    out.write("garch_std_residuals.csv", |w| {
        write_dated_csv(w, "value", &arima_fit.dates, &best.std_residuals)
    })?;
    out.write("garch_z_acf.csv", |w| gdiag.z_acf.write_csv(w))?;
    out.write("garch_z2_acf.csv", |w| gdiag.z2_acf.write_csv(w))?;
    write_pairs(&mut out, "garch_qq.csv", &gdiag.qq)?;

    // forecasts
    let arima_fc = forecast_arima(&arima_fit, config.arima_horizon).at(Stage::Forecast)?;
    let var_fc = forecast_variance(best, config.arima_horizon).at(Stage::Forecast)?;
    let combined =
        ForecastResult::from_point_sd(arima_fc.point.clone(), var_fc.sigma2.iter().map(|v| v.sqrt()).collect());
    out.write("arima_forecast.csv", |w| arima_fc.write_csv(w))?;
    out.write("garch_forecast.csv", |w| var_fc.write_csv(w))?;
    out.write("combined_forecast.csv", |w| combined.write_csv(w))?;

    // mgarch
    let (mgarch, dcc_fc) = if returns.len() >= 2 {
        let (section, fc) = run_mgarch(config, &returns, max_lag, &mut out)?;
        (Some(section), Some(fc))
    } else {
        (None, None)
    };

    let report = Report {
        config: config.clone(),
        data_summary,
        tests: TestsSection {
            series: primary.source_label().to_string(),
            adf,
            kpss,
            ljung_box_returns,
            ljung_box_squared_returns,
            ks_normal_returns,
            arch_lm_arima_residuals: arch_lm,
        },
        arima: ArimaSection {
            selection: table.rows.clone(),
            skipped: table.skipped.clone(),
            best_by_aic: table.best_by_aic,
            best_by_bic: table.best_by_bic,
            selected: ArimaSummary::from_fit(&arima_fit),
            ljung_box: adiag.ljung_box.clone(),
        },
        garch: GarchSection {
            fits: fits.iter().map(GarchSummary::from_fit).collect(),
            failed,
            selected: best.spec,
            ljung_box_z: gdiag.ljung_box_z.clone(),
            ljung_box_z2: gdiag.ljung_box_z2.clone(),
            ks: gdiag.ks,
            reference: gdiag.reference,
        },
        mgarch,
        forecasts: ForecastSection {
            arima: arima_fc,
            garch_variance: var_fc,
            combined,
            dcc: dcc_fc,
        },
        versions: Versions {
            schema: SCHEMA_VERSION,
            volmetrics: env!("CARGO_PKG_VERSION").to_string(),
        },
    };
    let json = report.to_json();
    let path = config.output_dir.join("report.json");
    fs::write(&path, json)
        .map_err(|source| Error::Io { path, source })
        .at(Stage::Output)?;
    log::info!("wrote report.json and {} CSV files", out.written.len());
    Ok(report)
}

fn write_pairs(out: &mut Output<'_>, name: &str, pairs: &[(f64, f64)]) -> Result<(), PipelineError> {
    out.rows(
        name,
        &["theoretical", "sample"],
        pairs.iter().map(|(a, b)| vec![a.to_string(), b.to_string()]).collect(),
    )
}

fn run_mgarch(
    config: &PipelineConfig,
    returns: &[ReturnSeries],
    max_lag: usize,
    out: &mut Output<'_>,
) -> Result<(MgarchSection, DccForecast), PipelineError> {
    let joined = MultiSeries::inner_join(returns).at(Stage::Mgarch)?;
    // the correlation model is fitted to demeaned returns
    let columns: Vec<Vec<f64>> = joined
        .columns()
        .iter()
        .map(|c| {
            let m = c.iter().sum::<f64>() / c.len() as f64;
            c.iter().map(|v| v - m).collect()
        })
        .collect();
    let series = MultiSeries::new(joined.labels().to_vec(), joined.dates().to_vec(), columns).at(Stage::Mgarch)?;
    let dcc = fit_dcc(&series).at(Stage::Mgarch)?;
    let ccc = fit_ccc(&series).at(Stage::Mgarch)?;
    let d = series.dim();
    let labels: Vec<String> = series.labels().iter().map(|l| file_label(l)).collect();
    for i in 0..d {
        out.write(&format!("dcc_volatility_{}.csv", labels[i]), |w| {
            write_volatility_csv(&dcc, i, w)
        })?;
        for j in i + 1..d {
            out.write(&format!("dcc_correlation_{}_{}.csv", labels[i], labels[j]), |w| {
                write_correlation_csv(&dcc, i, j, w)
            })?;
        }
    }
    let mut squared = Vec::new();
    if !dcc.eta.is_empty() {
        let diag = dcc_diagnostics(&dcc, max_lag.min(series.len() - 1)).at(Stage::Mgarch)?;
        for (i, dg) in diag.iter().enumerate() {
            out.write(&format!("dcc_sq_acf_before_{}.csv", labels[i]), |w| {
                dg.before_acf.write_csv(w)
            })?;
            out.write(&format!("dcc_sq_pacf_before_{}.csv", labels[i]), |w| {
                dg.before_pacf.write_csv(w)
            })?;
            out.write(&format!("dcc_sq_acf_after_{}.csv", labels[i]), |w| {
                dg.after_acf.write_csv(w)
            })?;
            out.write(&format!("dcc_sq_pacf_after_{}.csv", labels[i]), |w| {
                dg.after_pacf.write_csv(w)
            })?;
            squared.push(SquaredLjungBox {
                label: dg.label.clone(),
                before: dg.before_ljung_box.clone(),
                after: dg.after_ljung_box.clone(),
            });
        }
    }
    let fc = dcc_forecast(&dcc, config.dcc_horizon).at(Stage::Forecast)?;
    out.write("dcc_forecast.csv", |w| fc.write_csv(w))?;
    let section = MgarchSection {
        labels: series.labels().to_vec(),
        n: series.len(),
        first_date: series.dates()[0],
        last_date: *series.dates().last().expect("non-empty"),
        univariate: dcc.univariate.iter().map(GarchSummary::from_fit).collect(),
        a: dcc.a,
        b: dcc.b,
        se: dcc.se.clone(),
        tstats: dcc.tstats.clone(),
        s: dcc.s.clone(),
        correlation_loglik: dcc.correlation_loglik,
        loglik: dcc.loglik,
        flags: dcc.flags.clone(),
        ccc_correlation: ccc.correlation.clone(),
        ccc_loglik: ccc.loglik,
        squared_residual_ljung_box: squared,
    };
    Ok((section, fc))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_validation() {
        let c: PipelineConfig = serde_json::from_str(r#"{"inputs": [{"path": "x.csv"}]}"#).unwrap();
        assert_eq!(c.arima_horizon, 30);
        assert_eq!(c.dcc_horizon, 100);
        assert_eq!(c.d_values, vec![0, 1]);
        assert!(c.validate().is_ok());
        let bad = PipelineConfig {
            arima_horizon: 0,
            ..c.clone()
        };
        assert_eq!(bad.validate().unwrap_err().exit_code(), 2);
        let bad = PipelineConfig { p_max: 6, ..c.clone() };
        assert!(bad.validate().is_err());
        let bad = PipelineConfig {
            garch_models: vec![GarchSpec::arch(3)],
            ..c.clone()
        };
        assert!(bad.validate().is_err());
        let ok = PipelineConfig {
            garch_models: vec![GarchSpec::arch(3)],
            garch_order_cap: 3,
            ..c
        };
        assert!(ok.validate().is_ok());
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"inputs": [], "bogus": 1}"#).is_err());
    }

    #[test]
    fn missing_input_is_a_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let config = PipelineConfig {
            inputs: vec![InputConfig::new(dir.path().join("absent.csv"))],
            output_dir: dir.path().join("out"),
            ..PipelineConfig::default()
        };
        let err = run_pipeline(&config).unwrap_err();
        assert_eq!(err.stage, Stage::Data);
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("absent.csv"));
    }

    #[test]
    fn file_labels() {
        assert_eq!(file_label("Index A/1"), "index_a_1");
    }
}
