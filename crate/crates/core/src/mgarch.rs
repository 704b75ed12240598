//! Constant and dynamic conditional correlation GARCH(1,1), estimated in
//! two steps: univariate Gaussian GARCH(1,1) per column, then the
//! correlation dynamics on the devolatilized residuals `z_t`.
//!
//! `Q_t = (1 - a - b) S + a z_{t-1} z_{t-1}ᵀ + b Q_{t-1}` with `Q_1 = S`,
//! `P_t = diag(Q_t)^{-1/2} Q_t diag(Q_t)^{-1/2}` and `H_t = D_t P_t D_t`.

use std::io::Write;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{synthetic_dates, write_dated_csv, ReturnSeries};
use crate::error::{invalid, Error, Result};
use crate::garch::{fit_garch, forecast_variance, GarchFit, GarchParams, GarchSpec, GARCH_BURN_IN};
use crate::hypothesis::{ljung_box, TestResult};
use crate::linalg::{min_eigenvalue, sym_sqrt_and_inv};
use crate::optim::{self, FitFlag, Parameterization, Transform};
use crate::stats::{acf, pacf, AcfResult};

pub const MAX_DIMENSION: usize = 10;
const SINGULAR_EIGENVALUE: f64 = 1e-10;

/// Several return or residual series on one shared date index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiSeries {
    labels: Vec<String>,
    dates: Vec<NaiveDate>,
    /// One vector per series.
    columns: Vec<Vec<f64>>,
}

impl MultiSeries {
    pub fn new(labels: Vec<String>, dates: Vec<NaiveDate>, columns: Vec<Vec<f64>>) -> Result<Self> {
        let d = columns.len();
        if d < 2 {
            return Err(invalid(format!("need at least 2 series, got {d}")));
        }
        if d > MAX_DIMENSION {
            return Err(invalid(format!("at most {MAX_DIMENSION} series are supported")));
        }
        if labels.len() != d {
            return Err(invalid(format!("{} labels for {d} series", labels.len())));
        }
        if let Some((i, c)) = columns.iter().enumerate().find(|(_, c)| c.len() != dates.len()) {
            return Err(invalid(format!(
                "series {} has {} values for {} dates",
                labels[i],
                c.len(),
                dates.len()
            )));
        }
        if columns.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("multivariate series".into()));
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("dates must be strictly increasing"));
        }
        Ok(Self { labels, dates, columns })
    }

    /// Combines series whose dates match exactly.
    pub fn from_returns(series: &[ReturnSeries]) -> Result<Self> {
        let first = series.first().ok_or_else(|| invalid("no series given"))?;
        for s in series {
            if s.dates() != first.dates() {
                return Err(invalid(format!(
                    "dates of {} do not match {}",
                    s.source_label(),
                    first.source_label()
                )));
            }
        }
        Self::new(
            series.iter().map(|s| s.source_label().to_string()).collect(),
            first.dates().to_vec(),
            series.iter().map(|s| s.values().to_vec()).collect(),
        )
    }

    /// Keeps only the dates present in every series.
    pub fn inner_join(series: &[ReturnSeries]) -> Result<Self> {
        let first = series.first().ok_or_else(|| invalid("no series given"))?;
        let mut common: Vec<NaiveDate> = first.dates().to_vec();
        for s in &series[1..] {
            let set: std::collections::BTreeSet<_> = s.dates().iter().collect();
            common.retain(|d| set.contains(d));
        }
        let columns = series
            .iter()
            .map(|s| {
                let map: std::collections::BTreeMap<_, _> = s.dates().iter().zip(s.values()).collect();
                common.iter().map(|d| *map[d]).collect()
            })
            .collect();
        Self::new(
            series.iter().map(|s| s.source_label().to_string()).collect(),
            common,
            columns,
        )
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let d = rows.len();
    DMatrix::from_fn(d, d, |i, j| rows[i][j])
}

fn flat(m: &DMatrix<f64>) -> Vec<f64> {
    // row-major
    m.transpose().as_slice().to_vec()
}

fn unflat(v: &[f64], d: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(d, d, v)
}

fn normalize(q: &DMatrix<f64>) -> DMatrix<f64> {
    let d = q.nrows();
    let s: Vec<f64> = (0..d).map(|i| 1.0 / q[(i, i)].sqrt()).collect();
    DMatrix::from_fn(d, d, |i, j| {
        let (i, j) = (i.min(j), i.max(j));
        if i == j {
            1.0
        } else {
            q[(i, j)] * s[i] * s[j]
        }
    })
}

fn correlation_matrix(z: &[Vec<f64>]) -> DMatrix<f64> {
    let d = z.len();
    let n = z[0].len() as f64;
    let means: Vec<f64> = z.iter().map(|c| c.iter().sum::<f64>() / n).collect();
    let cov = DMatrix::from_fn(d, d, |i, j| {
        z[i].iter()
            .zip(&z[j])
            .map(|(a, b)| (a - means[i]) * (b - means[j]))
            .sum::<f64>()
            / n
    });
    normalize(&cov)
}

fn stage_one(series: &MultiSeries) -> Result<Vec<GarchFit>> {
    series
        .columns
        .par_iter()
        .zip(&series.labels)
        .map(|(c, label)| {
            fit_garch(c, GarchSpec::garch(1, 1)).map_err(|e| match e {
                Error::InvalidArgument(m) => Error::InvalidArgument(format!("{label}: {m}")),
                Error::Numerical(m) => Error::Numerical(format!("{label}: {m}")),
                other => other,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CccFit {
    pub labels: Vec<String>,
    pub univariate: Vec<GarchFit>,
    /// Constant correlation matrix, row-major rows.
    pub correlation: Vec<Vec<f64>>,
    pub loglik: f64,
    pub flags: Vec<FitFlag>,
}

impl CccFit {
    pub fn covariance_at(&self, t: usize) -> DMatrix<f64> {
        let p = from_rows(&self.correlation);
        let d = p.nrows();
        let s: Vec<f64> = self.univariate.iter().map(|f| f.cond_variance[t].sqrt()).collect();
        DMatrix::from_fn(d, d, |i, j| s[i] * p[(i, j)] * s[j])
    }
}

/// Correlation part of the Gaussian log-likelihood for a fixed path of
/// correlation matrices; `None` when some `P_t` is not positive definite.
fn correlation_loglik(z: &[DVector<f64>], p_path: impl Iterator<Item = DMatrix<f64>>) -> Option<f64> {
    let mut ll = 0.0;
    for (zt, p) in z.iter().zip(p_path) {
        let chol = p.cholesky()?;
        let logdet: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let solved = chol.solve(zt);
        ll += -0.5 * (logdet + zt.dot(&solved) - zt.dot(zt));
    }
    ll.is_finite().then_some(ll)
}

/// Constant conditional correlation: stage-one GARCH(1,1) fits and the
/// sample correlation of their standardized residuals.
pub fn fit_ccc(series: &MultiSeries) -> Result<CccFit> {
    let univariate = stage_one(series)?;
    let z: Vec<Vec<f64>> = univariate.iter().map(|f| f.std_residuals.clone()).collect();
    let p = correlation_matrix(&z);
    let mut flags = Vec::new();
    let zt = z_rows(&z);
    let stage1: f64 = univariate.iter().map(|f| f.loglik).sum();
    let loglik = if min_eigenvalue(&p) < SINGULAR_EIGENVALUE {
        flags.push(FitFlag::SingularCorrelation);
        f64::NEG_INFINITY
    } else {
        stage1 + correlation_loglik(&zt, std::iter::repeat(p.clone())).unwrap_or(f64::NEG_INFINITY)
    };
    Ok(CccFit {
        labels: series.labels.clone(),
        univariate,
        correlation: to_rows(&p),
        loglik,
        flags,
    })
}

fn z_rows(z: &[Vec<f64>]) -> Vec<DVector<f64>> {
    let n = z[0].len();
    (0..n)
        .map(|t| DVector::from_iterator(z.len(), z.iter().map(|c| c[t])))
        .collect()
}

/// `Q_t` for `t = 1..=n+1`; the last entry is the one-step-ahead matrix.
fn q_recursion(z: &[DVector<f64>], a: f64, b: f64, s: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
    let mut out = Vec::with_capacity(z.len() + 1);
    let base = s * (1.0 - a - b);
    let mut q = s.clone();
    for zt in z {
        let next = &base + (zt * zt.transpose()) * a + &q * b;
        out.push(std::mem::replace(&mut q, next));
    }
    out.push(q);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DccFit {
    pub labels: Vec<String>,
    pub dates: Vec<NaiveDate>,
    pub univariate: Vec<GarchFit>,
    pub a: f64,
    pub b: f64,
    pub param_names: Vec<String>,
    pub se: Vec<f64>,
    pub tstats: Vec<f64>,
    /// Unconditional correlation of the standardized residuals, rows.
    pub s: Vec<Vec<f64>>,
    /// Row-major `d×d` matrices, one per date.
    pub q_path: Vec<Vec<f64>>,
    pub p_path: Vec<Vec<f64>>,
    pub h_path: Vec<Vec<f64>>,
    /// `H_t^{-1/2} ε_t` per date.
    pub eta: Vec<Vec<f64>>,
    /// Stage-two correlation log-likelihood.
    pub correlation_loglik: f64,
    /// Stage one plus stage two.
    pub loglik: f64,
    pub converged: bool,
    pub flags: Vec<FitFlag>,
    /// `Q_{n+1}`, row-major.
    q_next: Vec<f64>,
}

impl DccFit {
    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn q_at(&self, t: usize) -> DMatrix<f64> {
        unflat(&self.q_path[t], self.dim())
    }

    pub fn p_at(&self, t: usize) -> DMatrix<f64> {
        unflat(&self.p_path[t], self.dim())
    }

    pub fn h_at(&self, t: usize) -> DMatrix<f64> {
        unflat(&self.h_path[t], self.dim())
    }

    pub fn s_matrix(&self) -> DMatrix<f64> {
        from_rows(&self.s)
    }

    /// Standardized residuals `ε_t / σ_t` from stage one, as rows.
    pub fn z_rows(&self) -> Vec<DVector<f64>> {
        let z: Vec<Vec<f64>> = self.univariate.iter().map(|f| f.std_residuals.clone()).collect();
        z_rows(&z)
    }

    /// Stage-two log-likelihood at arbitrary `(a, b)`.
    pub fn correlation_loglik_at(&self, a: f64, b: f64) -> Option<f64> {
        let z = self.z_rows();
        let q = q_recursion(&z, a, b, &self.s_matrix());
        correlation_loglik(&z, q[..z.len()].iter().map(normalize))
    }
}

const STAGE_TWO_CAP: f64 = 1.0 - 1e-6;

/// Two-step DCC-GARCH(1,1).
pub fn fit_dcc(series: &MultiSeries) -> Result<DccFit> {
    let univariate = stage_one(series)?;
    let d = series.dim();
    let n = series.len();
    let zcols: Vec<Vec<f64>> = univariate.iter().map(|f| f.std_residuals.clone()).collect();
    let z = z_rows(&zcols);
    let s = correlation_matrix(&zcols);
    let mut flags = Vec::new();
    let names = vec!["a".to_string(), "b".to_string()];

    let singular = min_eigenvalue(&s) < SINGULAR_EIGENVALUE;
    let (a, b, se, converged, corr_ll) = if singular {
        flags.push(FitFlag::SingularCorrelation);
        (0.0, 0.0, vec![f64::NAN; 2], true, f64::NEG_INFINITY)
    } else {
        let param = Parameterization::new(
            names.clone(),
            vec![Transform::Simplex {
                len: 2,
                cap: STAGE_TWO_CAP,
            }],
        )?;
        let nf = n as f64;
        let objective = |theta: &[f64]| -> f64 {
            let q = q_recursion(&z, theta[0], theta[1], &s);
            match correlation_loglik(&z, q[..n].iter().map(normalize)) {
                Some(ll) => -ll / nf,
                None => f64::INFINITY,
            }
        };
        let res = optim::minimize(objective, &[0.05, 0.9], &param, optim::DEFAULT_TOL)?;
        let cov = optim::natural_covariance(|t| nf * objective(t), &param, &res.free_minimizer);
        if cov.is_none() {
            flags.push(FitFlag::StandardErrorsUnavailable);
        }
        if !res.converged {
            flags.push(FitFlag::NotConverged);
        }
        let ll = -nf * res.objective_value;
        (
            res.minimizer[0],
            res.minimizer[1],
            optim::standard_errors(cov.as_ref(), 2),
            res.converged,
            ll,
        )
    };
    if a + b > 1.0 - 1e-4 {
        flags.push(FitFlag::CorrelationBoundary);
    }

    let q_all = q_recursion(&z, a, b, &s);
    let mut q_path = Vec::with_capacity(n);
    let mut p_path = Vec::with_capacity(n);
    let mut h_path = Vec::with_capacity(n);
    let mut eta = Vec::with_capacity(n);
    for (t, qt) in q_all.iter().take(n).enumerate() {
        let p = normalize(qt);
        let sd: Vec<f64> = univariate.iter().map(|f| f.cond_variance[t].sqrt()).collect();
        let h = DMatrix::from_fn(d, d, |i, j| sd[i] * p[(i, j)] * sd[j]);
        if !singular {
            let eps = DVector::from_iterator(d, univariate.iter().map(|f| f.residuals[t]));
            let (_, inv_sqrt) = sym_sqrt_and_inv(&h)?;
            eta.push((inv_sqrt * eps).iter().copied().collect());
        }
        q_path.push(flat(qt));
        p_path.push(flat(&p));
        h_path.push(flat(&h));
    }
    let stage1: f64 = univariate.iter().map(|f| f.loglik).sum();
    let tstats = [a, b].iter().zip(&se).map(|(v, s)| v / s).collect();
    Ok(DccFit {
        labels: series.labels.clone(),
        dates: series.dates.clone(),
        univariate,
        a,
        b,
        param_names: names,
        se,
        tstats,
        s: to_rows(&s),
        q_path,
        p_path,
        h_path,
        eta,
        correlation_loglik: corr_ll,
        loglik: stage1 + corr_ll,
        converged,
        flags,
        q_next: flat(&q_all[n]),
    })
}

/// `ρ_ij,t` with its dates.
pub fn dcc_correlations(fit: &DccFit, i: usize, j: usize) -> Result<Vec<(NaiveDate, f64)>> {
    let d = fit.dim();
    if i >= d || j >= d {
        return Err(invalid(format!("indices ({i}, {j}) out of range for {d} series")));
    }
    if i == j {
        return Err(invalid("correlation indices must differ"));
    }
    Ok(fit
        .dates
        .iter()
        .zip(&fit.p_path)
        .map(|(date, p)| (*date, p[i * d + j]))
        .collect())
}

/// Writes `date,value` for one correlation pair.
pub fn write_correlation_csv<W: Write>(fit: &DccFit, i: usize, j: usize, out: W) -> Result<()> {
    let rho = dcc_correlations(fit, i, j)?;
    let (dates, values): (Vec<_>, Vec<_>) = rho.into_iter().unzip();
    write_dated_csv(out, "value", &dates, &values)
}

/// Writes `date,value` of the conditional volatility `σ_t` of series `i`.
pub fn write_volatility_csv<W: Write>(fit: &DccFit, i: usize, out: W) -> Result<()> {
    let f = fit
        .univariate
        .get(i)
        .ok_or_else(|| invalid(format!("series index {i} out of range")))?;
    let sd: Vec<f64> = f.cond_variance.iter().map(|v| v.sqrt()).collect();
    write_dated_csv(out, "value", &fit.dates, &sd)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DccForecast {
    pub horizon: usize,
    pub labels: Vec<String>,
    /// `h × d` variance forecasts.
    pub sigma2: Vec<Vec<f64>>,
    /// Row-major correlation forecasts per step.
    pub correlation: Vec<Vec<f64>>,
    pub covariance: Vec<Vec<f64>>,
}

impl DccForecast {
    pub fn correlation_at(&self, step: usize) -> DMatrix<f64> {
        unflat(&self.correlation[step], self.labels.len())
    }

    pub fn covariance_at(&self, step: usize) -> DMatrix<f64> {
        unflat(&self.covariance[step], self.labels.len())
    }

    /// Writes `step,series_or_pair,value`: variances keyed by label, then
    /// correlations keyed `label_i:label_j`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Numerical(format!("csv write: {e}"));
        w.write_record(["step", "series_or_pair", "value"]).map_err(err)?;
        let d = self.labels.len();
        for k in 0..self.horizon {
            let step = (k + 1).to_string();
            for i in 0..d {
                w.write_record([step.as_str(), self.labels[i].as_str(), &self.sigma2[k][i].to_string()])
                    .map_err(err)?;
            }
            for i in 0..d {
                for j in i + 1..d {
                    let key = format!("{}:{}", self.labels[i], self.labels[j]);
                    w.write_record([step.as_str(), key.as_str(), &self.correlation[k][i * d + j].to_string()])
                        .map_err(err)?;
                }
            }
        }
        w.flush().map_err(|e| Error::Numerical(format!("csv write: {e}")))?;
        Ok(())
    }
}

/// h-step forecasts of variances, correlations and covariances.
pub fn dcc_forecast(fit: &DccFit, h: usize) -> Result<DccForecast> {
    if h == 0 {
        return Err(invalid("forecast horizon must be at least 1"));
    }
    let d = fit.dim();
    let per_series: Vec<Vec<f64>> = fit
        .univariate
        .iter()
        .map(|f| forecast_variance(f, h).map(|v| v.sigma2))
        .collect::<Result<_>>()?;
    let s = fit.s_matrix();
    let base = &s * (1.0 - fit.a - fit.b);
    let mut q = unflat(&fit.q_next, d);
    let mut sigma2 = Vec::with_capacity(h);
    let mut correlation = Vec::with_capacity(h);
    let mut covariance = Vec::with_capacity(h);
    for k in 0..h {
        if k > 0 {
            q = &base + &q * (fit.a + fit.b);
        }
        let p = normalize(&q);
        let v: Vec<f64> = per_series.iter().map(|s| s[k]).collect();
        let sd: Vec<f64> = v.iter().map(|x| x.sqrt()).collect();
        let hm = DMatrix::from_fn(d, d, |i, j| sd[i] * p[(i, j)] * sd[j]);
        sigma2.push(v);
        correlation.push(flat(&p));
        covariance.push(flat(&hm));
    }
    Ok(DccForecast {
        horizon: h,
        labels: fit.labels.clone(),
        sigma2,
        correlation,
        covariance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquaredResidualDiagnostics {
    pub label: String,
    pub before_acf: AcfResult,
    pub before_pacf: AcfResult,
    pub before_ljung_box: TestResult,
    pub after_acf: AcfResult,
    pub after_pacf: AcfResult,
    pub after_ljung_box: TestResult,
}

/// ACF/PACF and Ljung-Box of squared residuals before the model (`ε²`) and
/// after it (`η²`), per series.
pub fn dcc_diagnostics(fit: &DccFit, max_lag: usize) -> Result<Vec<SquaredResidualDiagnostics>> {
    if fit.eta.is_empty() {
        return Err(Error::Numerical(
            "standardized innovations unavailable for a singular correlation fit".into(),
        ));
    }
    (0..fit.dim())
        .map(|i| {
            let before: Vec<f64> = fit.univariate[i].residuals.iter().map(|e| e * e).collect();
            let after: Vec<f64> = fit.eta.iter().map(|r| r[i] * r[i]).collect();
            Ok(SquaredResidualDiagnostics {
                label: fit.labels[i].clone(),
                before_acf: acf(&before, max_lag)?,
                before_pacf: pacf(&before, max_lag)?,
                before_ljung_box: ljung_box(&before, max_lag, 0)?,
                after_acf: acf(&after, max_lag)?,
                after_pacf: pacf(&after, max_lag)?,
                after_ljung_box: ljung_box(&after, max_lag, 0)?,
            })
        })
        .collect()
}

/// Simulates a DCC-GARCH system with Gaussian innovations after a
/// 1000-step burn-in. `garch` holds one GARCH(p, q) parameter set per series.
pub fn simulate_dcc(
    garch: &[GarchParams],
    a: f64,
    b: f64,
    s: &DMatrix<f64>,
    n: usize,
    seed: u64,
) -> Result<MultiSeries> {
    let d = garch.len();
    if s.nrows() != d || s.ncols() != d {
        return Err(invalid(format!("S must be {d}×{d}")));
    }
    if (0..d).any(|i| (s[(i, i)] - 1.0).abs() > 1e-12)
        || (0..d).any(|i| (0..d).any(|j| (s[(i, j)] - s[(j, i)]).abs() > 1e-12))
    {
        return Err(invalid("S must be symmetric with unit diagonal"));
    }
    if !(min_eigenvalue(s) > 0.0) {
        return Err(invalid("S must be positive definite"));
    }
    if !(a >= 0.0 && b >= 0.0 && a + b < 1.0) {
        return Err(invalid(format!("need a, b >= 0 and a + b < 1, got ({a}, {b})")));
    }
    for g in garch {
        if !g.phi.is_empty() || g.shape.is_some() {
            return Err(invalid("simulation uses Gaussian GARCH components"));
        }
        g.check(&GarchSpec::garch(g.beta.len(), g.alpha.len()))?;
    }
    let total = n + GARCH_BURN_IN;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let uncond: Vec<f64> = garch.iter().map(|g| g.omega / (1.0 - g.persistence())).collect();
    let mut eps_hist: Vec<Vec<f64>> = vec![Vec::with_capacity(total); d];
    let mut s2_hist: Vec<Vec<f64>> = vec![Vec::with_capacity(total); d];
    let mut q = s.clone();
    let base = s * (1.0 - a - b);
    for t in 0..total {
        let p = normalize(&q);
        let l = p
            .cholesky()
            .ok_or_else(|| Error::Numerical("correlation matrix lost definiteness".into()))?
            .unpack();
        let eta = DVector::from_iterator(
            d,
            (0..d).map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)),
        );
        let z = l * eta;
        for (i, g) in garch.iter().enumerate() {
            let mut v = g.omega;
            for (j, al) in g.alpha.iter().enumerate() {
                v += al
                    * if t > j {
                        eps_hist[i][t - 1 - j].powi(2)
                    } else {
                        uncond[i]
                    };
            }
            for (k, be) in g.beta.iter().enumerate() {
                v += be * if t > k { s2_hist[i][t - 1 - k] } else { uncond[i] };
            }
            s2_hist[i].push(v);
            eps_hist[i].push(v.sqrt() * z[i]);
        }
        q = &base + (&z * z.transpose()) * a + &q * b;
    }
    let columns = eps_hist.into_iter().map(|c| c[GARCH_BURN_IN..].to_vec()).collect();
    MultiSeries::new(
        (1..=d).map(|i| format!("series{i}")).collect(),
        synthetic_dates(n),
        columns,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g11(omega: f64, alpha: f64, beta: f64) -> GarchParams {
        GarchParams {
            omega,
            alpha: vec![alpha],
            beta: vec![beta],
            phi: vec![],
            shape: None,
        }
    }

    fn s3() -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 3, &[1.0, 0.6, 0.3, 0.6, 1.0, 0.4, 0.3, 0.4, 1.0])
    }

    fn three(n: usize, a: f64, b: f64, seed: u64) -> MultiSeries {
        let g = vec![g11(0.05, 0.1, 0.85), g11(0.1, 0.12, 0.83), g11(0.02, 0.08, 0.9)];
        simulate_dcc(&g, a, b, &s3(), n, seed).unwrap()
    }

    #[test]
    fn multiseries_validation() {
        let dates = synthetic_dates(3);
        assert!(MultiSeries::new(vec!["a".into()], dates.clone(), vec![vec![1.0; 3]]).is_err());
        assert!(MultiSeries::new(
            vec!["a".into(), "b".into()],
            dates.clone(),
            vec![vec![1.0; 3], vec![1.0; 2]]
        )
        .is_err());
        let x = ReturnSeries::from_values(vec![0.1, 0.2, 0.3], "x").unwrap();
        let y = ReturnSeries::new(synthetic_dates(4)[1..].to_vec(), vec![0.5, 0.6, 0.7], "y").unwrap();
        assert!(MultiSeries::from_returns(&[x.clone(), y.clone()]).is_err());
        let j = MultiSeries::inner_join(&[x, y]).unwrap();
        assert_eq!(j.len(), 2);
        assert_eq!(j.columns()[0], vec![0.2, 0.3]);
        assert_eq!(j.columns()[1], vec![0.5, 0.6]);
    }

    #[test]
    fn ccc_independent_and_duplicated() {
        let ident = DMatrix::identity(2, 2);
        let g = vec![g11(0.05, 0.1, 0.85), g11(0.05, 0.1, 0.85)];
        let n = 3000;
        let m = simulate_dcc(&g, 0.0, 0.0, &ident, n, 1).unwrap();
        let fit = fit_ccc(&m).unwrap();
        assert!(fit.correlation[0][1].abs() < 3.0 / (n as f64).sqrt());
        let h = fit.covariance_at(10);
        assert!((h[(0, 0)] - fit.univariate[0].cond_variance[10]).abs() < 1e-12);

        let x = m.columns()[0].clone();
        let dup = MultiSeries::new(vec!["x".into(), "y".into()], m.dates().to_vec(), vec![x.clone(), x]).unwrap();
        let fit = fit_ccc(&dup).unwrap();
        assert!((fit.correlation[0][1] - 1.0).abs() < 1e-12);
        assert!(fit.flags.contains(&FitFlag::SingularCorrelation));
    }

    #[test]
    fn dcc_recovery_and_invariants() {
        let m = three(5000, 0.268, 0.571, 2);
        let fit = fit_dcc(&m).unwrap();
        assert!((fit.a - 0.268).abs() < 3.0 * fit.se[0], "a {} ± {}", fit.a, fit.se[0]);
        assert!((fit.b - 0.571).abs() < 3.0 * fit.se[1], "b {} ± {}", fit.b, fit.se[1]);
        for t in 0..m.len() {
            let p = fit.p_at(t);
            let h = fit.h_at(t);
            for i in 0..3 {
                assert!((p[(i, i)] - 1.0).abs() < 1e-12);
                for j in 0..3 {
                    assert!(p[(i, j)].abs() <= 1.0);
                    assert!((p[(i, j)] - p[(j, i)]).abs() < 1e-14);
                    let sd_i = fit.univariate[i].cond_variance[t].sqrt();
                    let sd_j = fit.univariate[j].cond_variance[t].sqrt();
                    assert!((h[(i, j)] - sd_i * p[(i, j)] * sd_j).abs() < 1e-10);
                }
            }
            assert!(min_eigenvalue(&h) > 0.0);
        }
        let ll0 = fit.correlation_loglik_at(0.0, 0.0).unwrap();
        assert!(fit.correlation_loglik >= ll0);

        // η covariance near identity
        let n = fit.eta.len() as f64;
        let band = 3.0 / n.sqrt();
        for i in 0..3 {
            for j in 0..3 {
                let c = fit.eta.iter().map(|r| r[i] * r[j]).sum::<f64>() / n;
                if i == j {
                    assert!((0.9..=1.1).contains(&c), "{c}");
                } else {
                    assert!(c.abs() < band, "{i}{j} {c}");
                }
            }
        }
        let rho = dcc_correlations(&fit, 0, 1).unwrap();
        assert_eq!(rho.len(), m.len());
        assert!(dcc_correlations(&fit, 0, 0).is_err());
        assert!(dcc_correlations(&fit, 0, 3).is_err());

        let diag = dcc_diagnostics(&fit, 10).unwrap();
        for dgn in &diag {
            assert!(dgn.before_ljung_box.reject_at_5pct);
            let inside = dgn.after_acf.values[1..]
                .iter()
                .filter(|v| v.abs() <= dgn.after_acf.conf_bound)
                .count();
            assert!(inside >= 9);
        }
    }

    #[test]
    fn forecast_limits() {
        let m = three(2000, 0.05, 0.9, 3);
        let fit = fit_dcc(&m).unwrap();
        let f = dcc_forecast(&fit, 500).unwrap();
        let s = fit.s_matrix();
        let target = normalize(&s);
        assert!((f.correlation_at(499) - target).amax() < 1e-6);
        for k in 0..100 {
            assert!(min_eigenvalue(&f.covariance_at(k)) > 0.0);
        }
        // step 1 equals one more in-sample recursion step
        let n = m.len();
        let z = fit.z_rows();
        let q1 = &s * (1.0 - fit.a - fit.b) + (&z[n - 1] * z[n - 1].transpose()) * fit.a + fit.q_at(n - 1) * fit.b;
        assert!((f.correlation_at(0) - normalize(&q1)).amax() < 1e-12);
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("step,series_or_pair,value\n1,series1,"));
        assert!(dcc_forecast(&fit, 0).is_err());
    }

    #[test]
    fn zero_dynamics_give_constant_correlation() {
        let m = three(20_000, 0.0, 0.0, 4);
        let ccc = fit_ccc(&m).unwrap();
        let s = s3();
        for i in 0..3 {
            for j in 0..3 {
                assert!((ccc.correlation[i][j] - s[(i, j)]).abs() < 0.03);
            }
        }
        let z: Vec<DVector<f64>> = (0..5).map(|k| DVector::from_element(3, k as f64 - 2.0)).collect();
        let q = q_recursion(&z, 0.0, 0.0, &s);
        assert!(q.iter().all(|m| (normalize(m) - &s).amax() < 1e-15));
    }

    #[test]
    fn identical_columns_dcc() {
        let m = three(800, 0.05, 0.9, 5);
        let x = m.columns()[0].clone();
        let dup = MultiSeries::new(vec!["x".into(), "y".into()], m.dates().to_vec(), vec![x.clone(), x]).unwrap();
        let fit = fit_dcc(&dup).unwrap();
        assert!(fit.flags.contains(&FitFlag::SingularCorrelation));
        assert!(fit.p_path.iter().all(|p| (p[1] - 1.0).abs() < 1e-12));
    }

    #[test]
    fn simulation_checks() {
        let g = vec![g11(0.05, 0.1, 0.85), g11(0.05, 0.1, 0.85)];
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 1.2, 1.2, 1.0]);
        assert!(simulate_dcc(&g, 0.1, 0.8, &bad, 10, 0).is_err());
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        assert!(simulate_dcc(&g, 0.5, 0.6, &s, 10, 0).is_err());
        let a = simulate_dcc(&g, 0.1, 0.8, &s, 50, 9).unwrap();
        let b = simulate_dcc(&g, 0.1, 0.8, &s, 50, 9).unwrap();
        assert_eq!(a, b);
    }
}
