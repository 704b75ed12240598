//! ARIMA(p, d, q) by exact Gaussian maximum likelihood.
//!
//! The differenced series is cast in state-space form with state dimension
//! `r = max(p, q + 1)` and run through the Kalman filter; the innovation
//! variance is concentrated out of the likelihood. Stationarity and
//! invertibility are enforced through the partial-autocorrelation transform
//! in [`crate::optim`].
//!
//! The model for the differenced series `w_t` is
//! `w_t = c + Σ a_i w_{t-i} + ε_t + Σ b_j ε_{t-j}` with `ε_t ~ N(0, σ²)`.

use std::fmt;
use std::io::Write;

use chrono::NaiveDate;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{difference_values, synthetic_dates, ReturnSeries};
use crate::error::{invalid, Error, Result};
use crate::hypothesis::ljung_box;
use crate::optim::{self, FitFlag, Parameterization, Transform};
use crate::stats::{acf, autocorrelations, durbin_levinson, AcfResult};

pub const MAX_ARMA_ORDER: usize = 5;
pub const MAX_DIFFERENCE: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArimaSpec {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    pub include_intercept: bool,
}

impl ArimaSpec {
    /// Intercept included exactly when `d = 0`.
    pub fn new(p: usize, d: usize, q: usize) -> Self {
        Self {
            p,
            d,
            q,
            include_intercept: d == 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p > MAX_ARMA_ORDER || self.q > MAX_ARMA_ORDER {
            return Err(invalid(format!("{self}: p and q are capped at {MAX_ARMA_ORDER}")));
        }
        if self.d > MAX_DIFFERENCE {
            return Err(invalid(format!("{self}: d is capped at {MAX_DIFFERENCE}")));
        }
        if self.d > 0 && self.include_intercept {
            return Err(invalid(format!("{self}: differenced models carry no intercept")));
        }
        Ok(())
    }

    /// Parameter count used by the information criteria (σ² included).
    pub fn num_params(&self) -> usize {
        self.p + self.q + usize::from(self.include_intercept) + 1
    }
}

impl fmt::Display for ArimaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ARIMA({},{},{})", self.p, self.d, self.q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Criteria {
    pub aic: f64,
    pub bic: f64,
}

/// `AIC = -2 ln L + 2k`, `BIC = -2 ln L + k ln n`.
pub fn information_criteria(loglik: f64, k: usize, n: usize) -> Criteria {
    let k = k as f64;
    Criteria {
        aic: -2.0 * loglik + 2.0 * k,
        bic: -2.0 * loglik + k * (n as f64).ln(),
    }
}

/// Estimated ARIMA model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaFit {
    pub spec: ArimaSpec,
    /// Regression constant `c`; the process mean is `c / (1 - Σ a_i)`.
    pub intercept: f64,
    pub mean: f64,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub sigma2: f64,
    pub loglik: f64,
    /// Names matching `estimates` and `se`: intercept (if any), ar1.., ma1..
    pub param_names: Vec<String>,
    pub estimates: Vec<f64>,
    pub se: Vec<f64>,
    /// One-step prediction errors of the differenced series.
    pub residuals: Vec<f64>,
    /// Prediction errors divided by their predictive standard deviation.
    pub standardized_residuals: Vec<f64>,
    pub dates: Vec<NaiveDate>,
    pub n_effective: usize,
    pub converged: bool,
    pub iterations: usize,
    pub flags: Vec<FitFlag>,
    /// Filtered state `a_{n+1|n}` (original units, mean removed).
    terminal_state: Vec<f64>,
    /// `P_{n+1|n}` in units of σ², row-major.
    terminal_cov: Vec<f64>,
    /// Last value of the series at each differencing level `0..d`.
    anchors: Vec<f64>,
}

impl ArimaFit {
    pub fn criteria(&self) -> Criteria {
        information_criteria(self.loglik, self.spec.num_params(), self.n_effective)
    }

    /// One-step predictions and predictive variances of `values` (a series on
    /// the same scale as the one fitted, before differencing) under the
    /// fitted parameters.
    pub fn one_step_predictions(&self, values: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let d = self.spec.d;
        if values.len() <= d {
            return Err(Error::InsufficientData {
                needed: d + 1,
                got: values.len(),
            });
        }
        let w: Vec<f64> = difference_values(values, d).iter().map(|x| x - self.mean).collect();
        let out = kalman(&w, &self.ar, &self.ma, true)?;
        let pred = w.iter().zip(&out.v).map(|(x, v)| x - v + self.mean).collect();
        let var = out.f.iter().map(|f| f * self.sigma2).collect();
        Ok((pred, var))
    }
}

/// Recorded output of a Kalman pass.
struct KalmanOut {
    sumsq: f64,
    sumlogf: f64,
    v: Vec<f64>,
    f: Vec<f64>,
    state: Vec<f64>,
    cov: Vec<f64>,
}

/// Companion-form transition applied on the left: `(T x)_i = a_i x_0 + x_{i+1}`.
fn t_apply(ar: &[f64], x: &[f64], out: &mut [f64]) {
    let r = x.len();
    for i in 0..r {
        let a = ar.get(i).copied().unwrap_or(0.0);
        out[i] = a * x[0] + if i + 1 < r { x[i + 1] } else { 0.0 };
    }
}

fn r_vector(ma: &[f64], r: usize) -> Vec<f64> {
    (0..r)
        .map(|i| {
            if i == 0 {
                1.0
            } else {
                ma.get(i - 1).copied().unwrap_or(0.0)
            }
        })
        .collect()
}

/// `P = T P Tᵀ + R Rᵀ` for the stationary ARMA state, in σ² units.
fn initial_covariance(ar: &[f64], ma: &[f64], r: usize) -> Result<Vec<f64>> {
    let rv = r_vector(ma, r);
    let mut t = DMatrix::<f64>::zeros(r, r);
    for i in 0..r {
        if i < ar.len() {
            t[(i, 0)] = ar[i];
        }
        if i + 1 < r {
            t[(i, i + 1)] = 1.0;
        }
    }
    let kron = t.kronecker(&t);
    let lhs = DMatrix::<f64>::identity(r * r, r * r) - kron;
    // vec() is column-major; RRᵀ is symmetric so the layout is irrelevant
    let rhs = nalgebra::DVector::from_iterator(r * r, (0..r * r).map(|k| rv[k / r] * rv[k % r]));
    let sol = lhs
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("singular stationary covariance system".into()))?;
    let mut p = vec![0.0; r * r];
    for i in 0..r {
        for j in 0..r {
            // column-major vec index j*r + i
            p[i * r + j] = 0.5 * (sol[j * r + i] + sol[i * r + j]);
        }
    }
    Ok(p)
}

/// Kalman filter for a zero-mean ARMA series.
fn kalman(w: &[f64], ar: &[f64], ma: &[f64], collect: bool) -> Result<KalmanOut> {
    let r = ar.len().max(ma.len() + 1);
    let rv = r_vector(ma, r);
    let mut p = initial_covariance(ar, ma, r)?;
    let mut a = vec![0.0; r];
    let mut a_upd = vec![0.0; r];
    let mut p_upd = vec![0.0; r * r];
    let mut m = vec![0.0; r * r];
    let mut steady = false;
    let mut out = KalmanOut {
        sumsq: 0.0,
        sumlogf: 0.0,
        v: Vec::with_capacity(if collect { w.len() } else { 0 }),
        f: Vec::with_capacity(if collect { w.len() } else { 0 }),
        state: Vec::new(),
        cov: Vec::new(),
    };
    for &y in w {
        let f = p[0];
        if !(f > 0.0) || !f.is_finite() {
            return Err(Error::Numerical(format!("innovation variance {f}")));
        }
        let v = y - a[0];
        out.sumsq += v * v / f;
        out.sumlogf += f.ln();
        if collect {
            out.v.push(v);
            out.f.push(f);
        }
        for i in 0..r {
            a_upd[i] = a[i] + p[i * r] * v / f;
        }
        t_apply(ar, &a_upd, &mut a);
        if steady {
            continue;
        }
        for i in 0..r {
            for j in 0..r {
                p_upd[i * r + j] = p[i * r + j] - p[i * r] * p[j] / f;
            }
        }
        // m = T p_upd
        for i in 0..r {
            let ai = ar.get(i).copied().unwrap_or(0.0);
            for j in 0..r {
                let below = if i + 1 < r { p_upd[(i + 1) * r + j] } else { 0.0 };
                m[i * r + j] = ai * p_upd[j] + below;
            }
        }
        // p = m Tᵀ + R Rᵀ
        let mut change: f64 = 0.0;
        for i in 0..r {
            for j in 0..r {
                let aj = ar.get(j).copied().unwrap_or(0.0);
                let right = if j + 1 < r { m[i * r + j + 1] } else { 0.0 };
                let new = aj * m[i * r] + right + rv[i] * rv[j];
                change = change.max((new - p[i * r + j]).abs());
                p[i * r + j] = new;
            }
        }
        if change < 1e-15 {
            steady = true;
        }
    }
    out.state = a;
    out.cov = p;
    Ok(out)
}

fn concentrated_loglik(n: usize, out: &KalmanOut) -> (f64, f64) {
    let nf = n as f64;
    let sigma2 = out.sumsq / nf;
    let ll = -0.5 * nf * ((2.0 * std::f64::consts::PI).ln() + sigma2.ln() + 1.0) - 0.5 * out.sumlogf;
    (ll, sigma2)
}

/// Largest modulus among the inverse roots of `1 - Σ c_i z^i`; below one
/// means all roots lie outside the unit circle.
pub(crate) fn max_inverse_root(coeffs: &[f64]) -> f64 {
    let k = coeffs.len();
    if k == 0 {
        return 0.0;
    }
    let mut comp = DMatrix::<f64>::zeros(k, k);
    for j in 0..k {
        comp[(0, j)] = coeffs[j];
    }
    for i in 1..k {
        comp[(i, i - 1)] = 1.0;
    }
    comp.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn layout(spec: &ArimaSpec) -> Result<Parameterization> {
    let mut names = Vec::new();
    let mut blocks = Vec::new();
    if spec.include_intercept {
        names.push("mean".to_string());
        blocks.push(Transform::Identity);
    }
    if spec.p > 0 {
        names.extend((1..=spec.p).map(|i| format!("ar{i}")));
        blocks.push(Transform::Stationary { len: spec.p });
    }
    if spec.q > 0 {
        names.extend((1..=spec.q).map(|i| format!("ma{i}")));
        blocks.push(Transform::Invertible { len: spec.q });
    }
    Parameterization::new(names, blocks)
}

struct Unpacked<'a> {
    mean: f64,
    ar: &'a [f64],
    ma: &'a [f64],
}

fn unpack<'a>(spec: &ArimaSpec, theta: &'a [f64]) -> Unpacked<'a> {
    let off = usize::from(spec.include_intercept);
    Unpacked {
        mean: if spec.include_intercept { theta[0] } else { 0.0 },
        ar: &theta[off..off + spec.p],
        ma: &theta[off + spec.p..off + spec.p + spec.q],
    }
}

fn initial_guess(spec: &ArimaSpec, w: &[f64]) -> Vec<f64> {
    let n = w.len() as f64;
    let mean = w.iter().sum::<f64>() / n;
    let mut theta = Vec::with_capacity(spec.p + spec.q + 1);
    if spec.include_intercept {
        theta.push(mean);
    }
    let ar = autocorrelations(w, spec.p)
        .ok()
        .filter(|_| spec.p > 0)
        .and_then(|rho| durbin_levinson(&rho).ok())
        .map(|(phi, _)| phi)
        .filter(|phi| max_inverse_root(phi) < 0.99)
        .unwrap_or_else(|| vec![0.0; spec.p]);
    theta.extend(ar);
    theta.extend(std::iter::repeat_n(0.0, spec.q));
    theta
}

/// Fits an ARIMA model by exact Gaussian maximum likelihood.
pub fn fit_arima(returns: &ReturnSeries, spec: ArimaSpec) -> Result<ArimaFit> {
    spec.validate()?;
    let n_total = returns.len();
    let needed = spec.d + spec.p + spec.q + 3;
    if n_total < needed {
        return Err(Error::InsufficientData { needed, got: n_total });
    }
    let values = returns.values();
    let diffed = difference_values(values, spec.d);
    let n = diffed.len();
    let scale = {
        let m = diffed.iter().sum::<f64>() / n as f64;
        (diffed.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64).sqrt()
    };
    if !(scale > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let w: Vec<f64> = diffed.iter().map(|x| x / scale).collect();

    let param = layout(&spec)?;
    let objective = |theta: &[f64]| -> f64 {
        let u = unpack(&spec, theta);
        let centered: Vec<f64> = w.iter().map(|x| x - u.mean).collect();
        match kalman(&centered, u.ar, u.ma, false) {
            Ok(out) => -concentrated_loglik(n, &out).0 / n as f64,
            Err(_) => f64::INFINITY,
        }
    };

    let init = initial_guess(&spec, &w);
    let dim = param.dim();
    let (theta, free, converged, iterations) = if dim == 0 {
        (Vec::new(), Vec::new(), true, 0)
    } else {
        let res = optim::minimize(objective, &init, &param, optim::DEFAULT_TOL)?;
        (res.minimizer, res.free_minimizer, res.converged, res.iterations)
    };

    let u = unpack(&spec, &theta);
    let centered: Vec<f64> = w.iter().map(|x| x - u.mean).collect();
    let out = kalman(&centered, u.ar, u.ma, true)?;
    let (ll_scaled, sigma2_scaled) = concentrated_loglik(n, &out);
    let loglik = ll_scaled - n as f64 * scale.ln();
    let sigma2 = sigma2_scaled * scale * scale;

    let ar = u.ar.to_vec();
    let ma = u.ma.to_vec();
    let mean = u.mean * scale;
    let ar_sum: f64 = ar.iter().sum();
    let intercept = mean * (1.0 - ar_sum);

    // covariance of (mean, ar, ma) in original units
    let mut flags = Vec::new();
    let cov = if dim == 0 {
        None
    } else {
        optim::natural_covariance(|t| n as f64 * objective(t), &param, &free).map(|mut c| {
            if spec.include_intercept {
                for j in 0..dim {
                    c[(0, j)] *= scale;
                    c[(j, 0)] *= scale;
                }
            }
            c
        })
    };
    if dim > 0 && cov.is_none() {
        flags.push(FitFlag::StandardErrorsUnavailable);
    }
    let mut estimates = Vec::with_capacity(dim);
    let mut se = optim::standard_errors(cov.as_ref(), dim);
    if spec.include_intercept {
        estimates.push(intercept);
        // delta method for c = μ (1 - Σ a)
        if let Some(c) = cov.as_ref() {
            let mut grad = vec![0.0; dim];
            grad[0] = 1.0 - ar_sum;
            for g in grad.iter_mut().skip(1).take(spec.p) {
                *g = -mean;
            }
            let mut var = 0.0;
            for i in 0..dim {
                for j in 0..dim {
                    var += grad[i] * c[(i, j)] * grad[j];
                }
            }
            se[0] = if var >= 0.0 { var.sqrt() } else { f64::NAN };
        }
    }
    estimates.extend(&ar);
    estimates.extend(&ma);
    let mut param_names = param.names().to_vec();
    if spec.include_intercept {
        param_names[0] = "intercept".into();
    }

    if !converged {
        flags.push(FitFlag::NotConverged);
    }
    let boundary = 1.0 / (1.0 + 1e-4);
    let ma_neg: Vec<f64> = ma.iter().map(|b| -b).collect();
    if max_inverse_root(&ar) >= boundary || max_inverse_root(&ma_neg) >= boundary {
        flags.push(FitFlag::UnitRootBoundary);
    }

    let residuals: Vec<f64> = out.v.iter().map(|v| v * scale).collect();
    let standardized_residuals = out
        .v
        .iter()
        .zip(&out.f)
        .map(|(v, f)| v / (f * sigma2_scaled).sqrt())
        .collect();
    let mut anchors = Vec::with_capacity(spec.d);
    for level in 0..spec.d {
        let lv = difference_values(values, level);
        anchors.push(*lv.last().expect("non-empty level"));
    }

    Ok(ArimaFit {
        spec,
        intercept,
        mean,
        ar,
        ma,
        sigma2,
        loglik,
        param_names,
        estimates,
        se,
        residuals,
        standardized_residuals,
        dates: returns.dates()[spec.d..].to_vec(),
        n_effective: n,
        converged,
        iterations,
        flags,
        terminal_state: out.state.iter().map(|s| s * scale).collect(),
        terminal_cov: out.cov,
        anchors,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub spec: ArimaSpec,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    pub k: usize,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTable {
    /// Sorted by BIC; ties go to fewer parameters, then lower q.
    pub rows: Vec<SelectionRow>,
    pub best_by_aic: ArimaSpec,
    pub best_by_bic: ArimaSpec,
    /// Grid points left out, with the reason.
    pub skipped: Vec<(ArimaSpec, String)>,
}

fn rank_key(row: &SelectionRow, crit: f64) -> (f64, usize, usize, usize, usize) {
    (crit, row.k, row.spec.q, row.spec.p, row.spec.d)
}

fn cmp_rows(a: &SelectionRow, b: &SelectionRow, by_aic: bool) -> std::cmp::Ordering {
    let (ca, cb) = if by_aic { (a.aic, b.aic) } else { (a.bic, b.bic) };
    let (ka, kb) = (rank_key(a, ca), rank_key(b, cb));
    ka.0.total_cmp(&kb.0)
        .then(ka.1.cmp(&kb.1))
        .then(ka.2.cmp(&kb.2))
        .then(ka.3.cmp(&kb.3))
        .then(ka.4.cmp(&kb.4))
}

/// Fits every grid point and ranks the results.
pub fn select_arima(returns: &ReturnSeries, p_max: usize, d_set: &[usize], q_max: usize) -> Result<SelectionTable> {
    let grid: Vec<ArimaSpec> = d_set
        .iter()
        .flat_map(|&d| (0..=p_max).flat_map(move |p| (0..=q_max).map(move |q| ArimaSpec::new(p, d, q))))
        .collect();
    select_from_grid(returns, &grid)
}

/// Ranks an explicit list of specifications.
pub fn select_from_grid(returns: &ReturnSeries, grid: &[ArimaSpec]) -> Result<SelectionTable> {
    if grid.is_empty() {
        return Err(invalid("empty model grid"));
    }
    for spec in grid {
        spec.validate()?;
    }
    let fits: Vec<(ArimaSpec, Result<ArimaFit>)> =
        grid.par_iter().map(|&spec| (spec, fit_arima(returns, spec))).collect();
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (spec, fit) in fits {
        match fit {
            Ok(fit) if fit.converged && fit.loglik.is_finite() => {
                let c = fit.criteria();
                rows.push(SelectionRow {
                    spec,
                    loglik: fit.loglik,
                    aic: c.aic,
                    bic: c.bic,
                    k: spec.num_params(),
                    n: fit.n_effective,
                });
            }
            Ok(_) => {
                log::warn!("{spec}: optimizer did not converge; excluded from selection");
                skipped.push((spec, "not converged".to_string()));
            }
            Err(e) => {
                log::warn!("{spec}: {e}; excluded from selection");
                skipped.push((spec, e.to_string()));
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::AllFitsFailed(grid.len()));
    }
    let best_by_aic = rows.iter().min_by(|a, b| cmp_rows(a, b, true)).expect("non-empty").spec;
    rows.sort_by(|a, b| cmp_rows(a, b, false));
    skipped.sort_by_key(|(s, _)| (s.d, s.p, s.q));
    Ok(SelectionTable {
        best_by_bic: rows[0].spec,
        best_by_aic,
        rows,
        skipped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LjungBoxPoint {
    pub lag: usize,
    pub statistic: f64,
    /// `None` while the lag does not exceed `p + q`.
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaDiagnostics {
    pub standardized_residuals: Vec<f64>,
    pub residual_acf: AcfResult,
    pub ljung_box: Vec<LjungBoxPoint>,
}

/// Residual panels: standardized residuals, their ACF, and Ljung-Box
/// p-values at every lag with `p + q` fitted degrees of freedom removed.
pub fn arima_diagnostics(fit: &ArimaFit, max_lag: usize) -> Result<ArimaDiagnostics> {
    let fit_df = fit.spec.p + fit.spec.q;
    if max_lag <= fit_df {
        return Err(invalid(format!(
            "max_lag {max_lag} must exceed the {fit_df} fitted ARMA coefficients"
        )));
    }
    let z = &fit.standardized_residuals;
    let residual_acf = acf(z, max_lag)?;
    let mut points = Vec::with_capacity(max_lag);
    for lag in 1..=max_lag {
        if lag > fit_df {
            let r = ljung_box(z, lag, fit_df)?;
            points.push(LjungBoxPoint {
                lag,
                statistic: r.statistic,
                p_value: Some(r.p_value),
            });
        } else {
            let r = ljung_box(z, lag, 0)?;
            points.push(LjungBoxPoint {
                lag,
                statistic: r.statistic,
                p_value: None,
            });
        }
    }
    Ok(ArimaDiagnostics {
        standardized_residuals: z.clone(),
        residual_acf,
        ljung_box: points,
    })
}

pub const BAND_RULE: &str = "point ± 2·sd";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastResult {
    pub horizon: usize,
    pub point: Vec<f64>,
    pub sd: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub band_rule: String,
}

impl ForecastResult {
    pub(crate) fn from_point_sd(point: Vec<f64>, sd: Vec<f64>) -> Self {
        let lower = point.iter().zip(&sd).map(|(p, s)| p - 2.0 * s).collect();
        let upper = point.iter().zip(&sd).map(|(p, s)| p + 2.0 * s).collect();
        Self {
            horizon: point.len(),
            point,
            sd,
            lower,
            upper,
            band_rule: BAND_RULE.to_string(),
        }
    }

    /// Writes `step,point,lower,upper` CSV.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Numerical(format!("csv write: {e}"));
        w.write_record(["step", "point", "lower", "upper"]).map_err(err)?;
        for i in 0..self.horizon {
            w.write_record([
                (i + 1).to_string(),
                self.point[i].to_string(),
                self.lower[i].to_string(),
                self.upper[i].to_string(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::Numerical(format!("csv write: {e}")))?;
        Ok(())
    }
}

/// ψ-weights of `θ(z) / (φ(z) (1 - z)^d)` up to `h` terms.
fn psi_weights(ar: &[f64], ma: &[f64], d: usize, h: usize) -> Vec<f64> {
    // φ*(z) = φ(z)(1 - z)^d written as 1 - Σ phi_star_i z^i
    let mut poly = vec![1.0];
    for a in ar {
        poly.push(-a);
    }
    for _ in 0..d {
        let mut next = vec![0.0; poly.len() + 1];
        for (i, c) in poly.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c;
        }
        poly = next;
    }
    let phi_star: Vec<f64> = poly[1..].iter().map(|c| -c).collect();
    let mut psi = vec![0.0; h];
    for j in 0..h {
        let mut v = if j == 0 {
            1.0
        } else {
            ma.get(j - 1).copied().unwrap_or(0.0)
        };
        for (i, c) in phi_star.iter().enumerate() {
            if j > i {
                v += c * psi[j - 1 - i];
            }
        }
        psi[j] = v;
    }
    psi
}

/// h-step minimum-MSE forecasts with `point ± 2·sd` bands.
pub fn forecast_arima(fit: &ArimaFit, h: usize) -> Result<ForecastResult> {
    if h == 0 {
        return Err(invalid("forecast horizon must be at least 1"));
    }
    let r = fit.terminal_state.len();
    let rv = r_vector(&fit.ma, r);
    let mut a = fit.terminal_state.clone();
    let mut p = fit.terminal_cov.clone();
    let mut next = vec![0.0; r];
    let mut m = vec![0.0; r * r];
    let mut w_point = Vec::with_capacity(h);
    let mut w_var = Vec::with_capacity(h);
    for _ in 0..h {
        w_point.push(fit.mean + a[0]);
        w_var.push(fit.sigma2 * p[0]);
        t_apply(&fit.ar, &a, &mut next);
        std::mem::swap(&mut a, &mut next);
        for i in 0..r {
            let ai = fit.ar.get(i).copied().unwrap_or(0.0);
            for j in 0..r {
                let below = if i + 1 < r { p[(i + 1) * r + j] } else { 0.0 };
                m[i * r + j] = ai * p[j] + below;
            }
        }
        for i in 0..r {
            for j in 0..r {
                let aj = fit.ar.get(j).copied().unwrap_or(0.0);
                let right = if j + 1 < r { m[i * r + j + 1] } else { 0.0 };
                p[i * r + j] = aj * m[i * r] + right + rv[i] * rv[j];
            }
        }
    }
    if fit.spec.d == 0 {
        let sd = w_var.iter().map(|v| v.sqrt()).collect();
        return Ok(ForecastResult::from_point_sd(w_point, sd));
    }
    // integrate the differenced forecasts back to the input scale
    let mut level = w_point;
    for anchor in fit.anchors.iter().rev() {
        let mut acc = *anchor;
        level = level
            .iter()
            .map(|x| {
                acc += x;
                acc
            })
            .collect();
    }
    let psi = psi_weights(&fit.ar, &fit.ma, fit.spec.d, h);
    let mut cum = 0.0;
    let sd = psi
        .iter()
        .map(|p| {
            cum += p * p;
            (fit.sigma2 * cum).sqrt()
        })
        .collect();
    Ok(ForecastResult::from_point_sd(level, sd))
}

/// Coefficients for simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaCoefficients {
    pub intercept: f64,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
}

pub const ARIMA_BURN_IN: usize = 500;

/// Simulates `n` observations after a 500-step burn-in. Deterministic per
/// seed. For `d > 0` the ARMA path is integrated `d` times from zero.
pub fn simulate_arima(
    spec: ArimaSpec,
    coefficients: &ArimaCoefficients,
    sigma: f64,
    n: usize,
    seed: u64,
) -> Result<ReturnSeries> {
    if coefficients.ar.len() != spec.p || coefficients.ma.len() != spec.q {
        return Err(invalid(format!(
            "{spec} needs {} AR and {} MA coefficients",
            spec.p, spec.q
        )));
    }
    if !(sigma > 0.0) {
        return Err(invalid("sigma must be positive"));
    }
    if max_inverse_root(&coefficients.ar) >= 1.0 {
        return Err(invalid("AR coefficients are not stationary"));
    }
    let ma_neg: Vec<f64> = coefficients.ma.iter().map(|b| -b).collect();
    if max_inverse_root(&ma_neg) >= 1.0 {
        return Err(invalid("MA coefficients are not invertible"));
    }
    let ar_sum: f64 = coefficients.ar.iter().sum();
    let mean = coefficients.intercept / (1.0 - ar_sum);
    let total = n + ARIMA_BURN_IN;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps: Vec<f64> = (0..total)
        .map(|_| sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
        .collect();
    let mut w = vec![mean; total];
    for t in 0..total {
        let mut v = coefficients.intercept + eps[t];
        for (i, a) in coefficients.ar.iter().enumerate() {
            v += a * if t > i { w[t - 1 - i] } else { mean };
        }
        for (j, b) in coefficients.ma.iter().enumerate() {
            if t > j {
                v += b * eps[t - 1 - j];
            }
        }
        w[t] = v;
    }
    let mut values = w.split_off(ARIMA_BURN_IN);
    for _ in 0..spec.d {
        let mut acc = 0.0;
        for v in values.iter_mut() {
            acc += *v;
            *v = acc;
        }
    }
    ReturnSeries::new(synthetic_dates(n), values, format!("simulated {spec}"))
}
