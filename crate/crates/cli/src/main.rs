use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde_json::json;

use volmetrics::arima::{
    arima_diagnostics, fit_arima, forecast_arima, select_arima, simulate_arima, ArimaCoefficients, ArimaSpec,
};
use volmetrics::data::{descriptive_stats, histogram_data, load_csv, log_returns, ReturnSeries};
use volmetrics::garch::{
    fit_garch_with_cap, forecast_variance, garch_diagnostics, simulate_garch, GarchFamily, GarchParams, GarchSpec,
    Innovation, MAX_GARCH_ORDER,
};
use volmetrics::hypothesis::{
    adf_test, arch_lm_test, default_adf_lags, default_ljung_box_lags, kpss_test, ljung_box, AdfDeterministic,
};
use volmetrics::mgarch::{dcc_diagnostics, fit_dcc, simulate_dcc, MultiSeries};
use volmetrics::pipeline::{run_pipeline, InputConfig, PipelineConfig, OUTPUT_DIR_ENV};
use volmetrics::pipeline::{ArimaSummary, GarchSummary};
use volmetrics::stats::{acf, pacf};
use volmetrics::Error;

#[derive(Parser)]
#[command(
    name = "volmetrics",
    version,
    about = "Return diagnostics, ARIMA, GARCH and DCC-GARCH for index series"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Descriptive statistics, histogram and ACF/PACF of log returns.
    Stats {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 20)]
        max_lag: usize,
        #[arg(long, default_value_t = 30)]
        bins: usize,
    },
    /// ADF, KPSS, Ljung-Box and ARCH-LM tests on log returns.
    Test {
        #[command(flatten)]
        data: DataArgs,
        /// Ljung-Box and ARCH-LM lags (default min(10, n/5)).
        #[arg(long)]
        lags: Option<usize>,
        /// ADF lag order (default ⌊(n-1)^(1/3)⌋).
        #[arg(long)]
        adf_lags: Option<usize>,
        /// Include a linear trend in the ADF regression.
        #[arg(long)]
        trend: bool,
    },
    /// Fit one ARIMA(p,d,q) model.
    FitArima {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        p: usize,
        #[arg(long, default_value_t = 0)]
        d: usize,
        #[arg(long)]
        q: usize,
        #[arg(long, default_value_t = 20)]
        max_lag: usize,
    },
    /// Rank ARIMA models on a (p, d, q) grid by BIC.
    SelectArima {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 5)]
        pmax: usize,
        #[arg(long, default_value_t = 5)]
        qmax: usize,
        #[arg(long, value_delimiter = ',', default_value = "0,1")]
        d: Vec<usize>,
    },
    /// Fit a variance model to ARIMA residuals (or demeaned returns).
    FitGarch {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: GarchArgs,
        /// Mean model as p,d,q; demeaned returns when absent.
        #[arg(long, value_parser = parse_order)]
        arima: Option<ArimaSpec>,
        #[arg(long, default_value_t = 20)]
        max_lag: usize,
    },
    /// Two-step DCC-GARCH(1,1) on two or more series.
    FitDcc {
        /// Level CSV files, one per series.
        #[arg(long = "input", required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value = "date")]
        date_column: String,
        #[arg(long, default_value = "price")]
        value_column: String,
        #[arg(long, default_value_t = 20)]
        max_lag: usize,
    },
    /// ARIMA point forecasts with ±2·sd bands, written as CSV.
    Forecast {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_parser = parse_order, default_value = "2,0,2")]
        arima: ArimaSpec,
        #[arg(long, default_value_t = 30)]
        h: usize,
        /// Take the band width from a GARCH(1,1) variance forecast with this innovation law.
        #[arg(long)]
        garch: Option<InnovationArg>,
    },
    /// Simulate from a model and write CSV to stdout.
    Simulate {
        #[command(subcommand)]
        model: SimulateCommand,
    },
    /// Full pipeline: report.json plus plot-data CSVs.
    Run {
        /// JSON configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Level CSV files; the first drives the univariate stages.
        #[arg(long = "input", num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(long, env = OUTPUT_DIR_ENV)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Args)]
struct DataArgs {
    /// CSV file with a date column and a level column.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "date")]
    date_column: String,
    #[arg(long, default_value = "price")]
    value_column: String,
    /// The value column already holds returns.
    #[arg(long)]
    returns: bool,
}

#[derive(Args)]
struct GarchArgs {
    #[arg(long, value_enum, default_value_t = FamilyArg::Garch)]
    family: FamilyArg,
    #[arg(long, default_value_t = 1)]
    p: usize,
    #[arg(long, default_value_t = 1)]
    q: usize,
    #[arg(long, value_enum, default_value_t = InnovationArg::Normal)]
    innovation: InnovationArg,
    /// Cap on p and q.
    #[arg(long, default_value_t = MAX_GARCH_ORDER)]
    max_order: usize,
}

impl GarchArgs {
    fn spec(&self) -> GarchSpec {
        GarchSpec {
            family: self.family.into(),
            p: if self.family == FamilyArg::Arch { 0 } else { self.p },
            q: self.q,
            innovation: self.innovation.into(),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FamilyArg {
    Arch,
    Garch,
    Egarch,
}

impl From<FamilyArg> for GarchFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Arch => GarchFamily::Arch,
            FamilyArg::Garch => GarchFamily::Garch,
            FamilyArg::Egarch => GarchFamily::Egarch,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InnovationArg {
    Normal,
    #[value(name = "student_t", alias = "student-t", alias = "t")]
    StudentT,
}

impl From<InnovationArg> for Innovation {
    fn from(i: InnovationArg) -> Self {
        match i {
            InnovationArg::Normal => Innovation::Normal,
            InnovationArg::StudentT => Innovation::StudentT,
        }
    }
}

#[derive(Subcommand)]
enum SimulateCommand {
    /// ARIMA(p,d,q) with Gaussian shocks.
    Arima {
        #[arg(long, default_value_t = 0)]
        d: usize,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        ar: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        ma: Vec<f64>,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        intercept: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[command(flatten)]
        out: SimOutput,
    },
    /// ARCH/GARCH/EGARCH innovations.
    Garch {
        #[arg(long, value_enum, default_value_t = FamilyArg::Garch)]
        family: FamilyArg,
        #[arg(long, allow_hyphen_values = true)]
        omega: f64,
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        alpha: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        beta: Vec<f64>,
        /// EGARCH asymmetry terms.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        phi: Vec<f64>,
        /// Student-t degrees of freedom; Gaussian when absent.
        #[arg(long)]
        shape: Option<f64>,
        #[command(flatten)]
        out: SimOutput,
    },
    /// DCC-GARCH(1,1) system with Gaussian innovations.
    Dcc {
        /// omega,alpha,beta for one series; repeat per series.
        #[arg(long = "garch", required = true, num_args = 1, value_delimiter = ',')]
        garch: Vec<f64>,
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
        /// Unconditional correlation matrix, row-major, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        corr: Vec<f64>,
        /// Column names, comma separated.
        #[arg(long, value_delimiter = ',')]
        labels: Vec<String>,
        #[command(flatten)]
        out: SimOutput,
    },
}

#[derive(Args)]
struct SimOutput {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Emit price levels starting from this value instead of returns.
    #[arg(long)]
    levels: Option<f64>,
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    fn data(e: Error) -> Self {
        Self {
            code: 3,
            message: format!("data: {e}"),
        }
    }

    fn estimation(e: Error) -> Self {
        let code = if matches!(e, Error::InvalidArgument(_)) { 2 } else { 4 };
        Self {
            code,
            message: format!("estimation: {e}"),
        }
    }

    fn io(e: io::Error) -> Self {
        Self {
            code: 2,
            message: format!("output: {e}"),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn load_returns(data: &DataArgs) -> CliResult<ReturnSeries> {
    load_returns_from(&data.input, &data.date_column, &data.value_column, data.returns)
}

fn load_returns_from(path: &PathBuf, date: &str, value: &str, already_returns: bool) -> CliResult<ReturnSeries> {
    let obs = load_csv(path, date, value).map_err(CliError::data)?;
    if already_returns {
        ReturnSeries::new(obs.dates().to_vec(), obs.values().to_vec(), obs.label()).map_err(CliError::data)
    } else {
        log_returns(&obs).map_err(CliError::data)
    }
}

fn print_json(value: &serde_json::Value) -> CliResult<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| CliError::io(e.into()))?;
    writeln!(out).map_err(CliError::io)
}

fn parse_order(s: &str) -> Result<ArimaSpec, String> {
    let parts = s
        .split(',')
        .map(|v| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    match parts[..] {
        [p, d, q] => Ok(ArimaSpec::new(p, d, q)),
        _ => Err(format!("expected p,d,q, got {s:?}")),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Stats { data, max_lag, bins } => {
            let r = load_returns(&data)?;
            let x = r.values();
            print_json(&json!({
                "series": r.source_label(),
                "n": x.len(),
                "descriptive": descriptive_stats(x).map_err(CliError::data)?,
                "histogram": histogram_data(x, bins).map_err(CliError::estimation)?,
                "acf": acf(x, max_lag).map_err(CliError::estimation)?,
                "pacf": pacf(x, max_lag).map_err(CliError::estimation)?,
            }))
        }
        Command::Test {
            data,
            lags,
            adf_lags,
            trend,
        } => {
            let r = load_returns(&data)?;
            let x = r.values();
            let lags = lags.unwrap_or_else(|| default_ljung_box_lags(x.len()));
            let det = if trend {
                AdfDeterministic::ConstantTrend
            } else {
                AdfDeterministic::Constant
            };
            let sq: Vec<f64> = x.iter().map(|v| v * v).collect();
            let est = CliError::estimation;
            print_json(&json!({
                "series": r.source_label(),
                "adf": adf_test(x, adf_lags.unwrap_or_else(|| default_adf_lags(x.len())), det).map_err(est)?,
                "kpss": kpss_test(x).map_err(est)?,
                "ljung_box": ljung_box(x, lags, 0).map_err(est)?,
                "ljung_box_squared": ljung_box(&sq, lags, 0).map_err(est)?,
                "arch_lm": arch_lm_test(x, lags).map_err(est)?,
            }))
        }
        Command::FitArima { data, p, d, q, max_lag } => {
            let r = load_returns(&data)?;
            let fit = fit_arima(&r, ArimaSpec::new(p, d, q)).map_err(CliError::estimation)?;
            let diag = arima_diagnostics(&fit, max_lag.max(p + q + 1)).map_err(CliError::estimation)?;
            print_json(&json!({
                "fit": ArimaSummary::from_fit(&fit),
                "ljung_box": diag.ljung_box,
                "residual_acf": diag.residual_acf,
            }))
        }
        Command::SelectArima { data, pmax, qmax, d } => {
            let r = load_returns(&data)?;
            let table = select_arima(&r, pmax, &d, qmax).map_err(CliError::estimation)?;
            print_json(&serde_json::to_value(&table).expect("table serializes"))
        }
        Command::FitGarch {
            data,
            model,
            arima,
            max_lag,
        } => {
            let r = load_returns(&data)?;
            let resid = match arima {
                Some(spec) => fit_arima(&r, spec).map_err(CliError::estimation)?.residuals,
                None => {
                    let m = r.values().iter().sum::<f64>() / r.len() as f64;
                    r.values().iter().map(|v| v - m).collect()
                }
            };
            let fit = fit_garch_with_cap(&resid, model.spec(), model.max_order).map_err(CliError::estimation)?;
            let diag = garch_diagnostics(&fit, max_lag.min(resid.len() - 1)).map_err(CliError::estimation)?;
            print_json(&json!({
                "fit": GarchSummary::from_fit(&fit),
                "ljung_box_z": diag.ljung_box_z,
                "ljung_box_z2": diag.ljung_box_z2,
                "ks": diag.ks,
            }))
        }
        Command::FitDcc {
            inputs,
            date_column,
            value_column,
            max_lag,
        } => {
            let series: Vec<ReturnSeries> = inputs
                .iter()
                .map(|p| {
                    let r = load_returns_from(p, &date_column, &value_column, false)?;
                    let label = p
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_default();
                    let m = r.values().iter().sum::<f64>() / r.len() as f64;
                    let v = r.values().iter().map(|x| x - m).collect();
                    ReturnSeries::new(r.dates().to_vec(), v, label).map_err(CliError::data)
                })
                .collect::<CliResult<_>>()?;
            let m = MultiSeries::inner_join(&series).map_err(CliError::data)?;
            let fit = fit_dcc(&m).map_err(CliError::estimation)?;
            let diag = if fit.eta.is_empty() {
                Vec::new()
            } else {
                dcc_diagnostics(&fit, max_lag).map_err(CliError::estimation)?
            };
            let lb: Vec<_> = diag
                .iter()
                .map(|d| json!({"label": d.label, "before": d.before_ljung_box, "after": d.after_ljung_box}))
                .collect();
            print_json(&json!({
                "labels": fit.labels,
                "n": m.len(),
                "univariate": fit.univariate.iter().map(GarchSummary::from_fit).collect::<Vec<_>>(),
                "a": fit.a,
                "b": fit.b,
                "se": fit.se,
                "tstats": fit.tstats,
                "s": fit.s,
                "loglik": fit.loglik,
                "flags": fit.flags,
                "squared_residual_ljung_box": lb,
            }))
        }
        Command::Forecast { data, arima, h, garch } => {
            let r = load_returns(&data)?;
            let fit = fit_arima(&r, arima).map_err(CliError::estimation)?;
            let mut fc = forecast_arima(&fit, h).map_err(CliError::estimation)?;
            if let Some(innovation) = garch {
                let spec = GarchSpec::garch(1, 1).with_innovation(innovation.into());
                let g = fit_garch_with_cap(&fit.residuals, spec, MAX_GARCH_ORDER).map_err(CliError::estimation)?;
                let v = forecast_variance(&g, h).map_err(CliError::estimation)?;
                for (i, s2) in v.sigma2.iter().enumerate() {
                    let sd = s2.sqrt();
                    fc.sd[i] = sd;
                    fc.lower[i] = fc.point[i] - 2.0 * sd;
                    fc.upper[i] = fc.point[i] + 2.0 * sd;
                }
            }
            fc.write_csv(io::stdout().lock()).map_err(CliError::estimation)
        }
        Command::Simulate { model } => simulate(model),
        Command::Run {
            config,
            inputs,
            output_dir,
            seed,
        } => {
            let mut cfg = match config {
                Some(path) => PipelineConfig::from_json_file(&path).map_err(|e| CliError {
                    code: e.exit_code() as u8,
                    message: e.to_string(),
                })?,
                None => PipelineConfig::default(),
            };
            if !inputs.is_empty() {
                cfg.inputs = inputs.into_iter().map(InputConfig::new).collect();
                cfg.base_dir = PathBuf::new();
            }
            if let Some(dir) = output_dir {
                cfg.output_dir = dir;
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if cfg.inputs.is_empty() {
                return Err(CliError::config("run needs --config or at least one --input"));
            }
            run_pipeline(&cfg).map_err(|e| CliError {
                code: e.exit_code() as u8,
                message: e.to_string(),
            })?;
            eprintln!("report written to {}", cfg.output_dir.join("report.json").display());
            Ok(())
        }
    }
}

fn to_levels(values: &[f64], start: f64) -> Vec<f64> {
    let mut acc = 0.0;
    values
        .iter()
        .map(|r| {
            acc += r;
            start * acc.exp()
        })
        .collect()
}

fn write_columns(header: &[String], dates: &[String], columns: &[Vec<f64>]) -> CliResult<()> {
    let mut out = io::BufWriter::new(io::stdout().lock());
    writeln!(out, "date,{}", header.join(",")).map_err(CliError::io)?;
    for (t, d) in dates.iter().enumerate() {
        let row: Vec<String> = columns.iter().map(|c| c[t].to_string()).collect();
        writeln!(out, "{d},{}", row.join(",")).map_err(CliError::io)?;
    }
    out.flush().map_err(CliError::io)
}

fn finish(out: &SimOutput, header: Vec<String>, dates: Vec<String>, mut columns: Vec<Vec<f64>>) -> CliResult<()> {
    if let Some(start) = out.levels {
        if start.is_nan() || start <= 0.0 {
            return Err(CliError::config("--levels must be positive"));
        }
        columns = columns.iter().map(|c| to_levels(c, start)).collect();
    }
    write_columns(&header, &dates, &columns)
}

fn date_strings(r: &ReturnSeries) -> Vec<String> {
    r.dates().iter().map(|d| d.format("%Y-%m-%d").to_string()).collect()
}

fn simulate(model: SimulateCommand) -> CliResult<()> {
    match model {
        SimulateCommand::Arima {
            d,
            ar,
            ma,
            intercept,
            sigma,
            out,
        } => {
            let spec = ArimaSpec {
                p: ar.len(),
                d,
                q: ma.len(),
                include_intercept: d == 0,
            };
            let coef = ArimaCoefficients { intercept, ar, ma };
            let r = simulate_arima(spec, &coef, sigma, out.n, out.seed).map_err(CliError::estimation)?;
            let name = if out.levels.is_some() { "price" } else { "value" };
            finish(&out, vec![name.into()], date_strings(&r), vec![r.values().to_vec()])
        }
        SimulateCommand::Garch {
            family,
            omega,
            alpha,
            beta,
            phi,
            shape,
            out,
        } => {
            let spec = GarchSpec {
                family: family.into(),
                p: beta.len(),
                q: alpha.len(),
                innovation: if shape.is_some() {
                    Innovation::StudentT
                } else {
                    Innovation::Normal
                },
            };
            let params = GarchParams {
                omega,
                alpha,
                beta,
                phi,
                shape,
            };
            let x = simulate_garch(&spec, &params, out.n, out.seed).map_err(CliError::estimation)?;
            let r = ReturnSeries::from_values(x, "sim").map_err(CliError::estimation)?;
            let name = if out.levels.is_some() { "price" } else { "value" };
            finish(&out, vec![name.into()], date_strings(&r), vec![r.values().to_vec()])
        }
        SimulateCommand::Dcc {
            garch,
            a,
            b,
            corr,
            labels,
            out,
        } => {
            if garch.len() % 3 != 0 || garch.len() < 6 {
                return Err(CliError::config(
                    "each --garch takes omega,alpha,beta; give at least two",
                ));
            }
            let params: Vec<GarchParams> = garch
                .chunks(3)
                .map(|c| GarchParams {
                    omega: c[0],
                    alpha: vec![c[1]],
                    beta: vec![c[2]],
                    phi: vec![],
                    shape: None,
                })
                .collect();
            let d = params.len();
            let s = if corr.is_empty() {
                DMatrix::identity(d, d)
            } else if corr.len() == d * d {
                DMatrix::from_row_slice(d, d, &corr)
            } else {
                return Err(CliError::config(format!("--corr needs {} entries", d * d)));
            };
            let m = simulate_dcc(&params, a, b, &s, out.n, out.seed).map_err(CliError::estimation)?;
            let header = if labels.is_empty() {
                m.labels().to_vec()
            } else if labels.len() == d {
                labels
            } else {
                return Err(CliError::config(format!("--labels needs {d} names")));
            };
            let dates = m.dates().iter().map(|d| d.format("%Y-%m-%d").to_string()).collect();
            finish(&out, header, dates, m.columns().to_vec())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
