//! ARCH, GARCH, EGARCH with Gaussian or unit-variance Student-t
//! innovations, fitted by maximum likelihood on mean-equation residuals.
//!
//! Variance equations for `ε_t = σ_t Z_t`:
//!
//! * GARCH(p, q): `σ²_t = ω + Σ α_j ε²_{t-j} + Σ β_i σ²_{t-i}` (ARCH is `p = 0`)
//! * EGARCH(p, q): `ln σ²_t = ω + Σ β_i ln σ²_{t-i} + Σ [α_j Z_{t-j} + φ_j (|Z_{t-j}| - E|Z|)]`
//!
//! The recursion starts from the residual second moment: `σ²_0` and every
//! pre-sample `ε²` equal `mean(ε²)`. For EGARCH the pre-sample shock terms
//! are zero.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::data::write_dated_csv;
use crate::error::{invalid, Error, Result};
use crate::hypothesis::{ljung_box, TestResult};
use crate::optim::{self, FitFlag, Parameterization, Transform};
use crate::stats::{acf, ks_test, AcfResult, KsResult, Reference};

pub const MAX_GARCH_ORDER: usize = 2;
pub const GARCH_BURN_IN: usize = 1000;
/// Smallest admissible Student-t shape.
pub const MIN_SHAPE: f64 = 2.01;
const PERSISTENCE_CAP: f64 = 1.0 - 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GarchFamily {
    Arch,
    Garch,
    Egarch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Innovation {
    Normal,
    StudentT,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GarchSpec {
    pub family: GarchFamily,
    /// Lagged-variance order.
    pub p: usize,
    /// Shock order.
    pub q: usize,
    pub innovation: Innovation,
}

impl GarchSpec {
    pub fn garch(p: usize, q: usize) -> Self {
        Self {
            family: GarchFamily::Garch,
            p,
            q,
            innovation: Innovation::Normal,
        }
    }

    pub fn arch(q: usize) -> Self {
        Self {
            family: GarchFamily::Arch,
            p: 0,
            q,
            innovation: Innovation::Normal,
        }
    }

    pub fn egarch(p: usize, q: usize) -> Self {
        Self {
            family: GarchFamily::Egarch,
            p,
            q,
            innovation: Innovation::Normal,
        }
    }

    pub fn with_innovation(mut self, innovation: Innovation) -> Self {
        self.innovation = innovation;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with_cap(MAX_GARCH_ORDER)
    }

    pub fn validate_with_cap(&self, cap: usize) -> Result<()> {
        if self.q == 0 {
            return Err(invalid(format!("{self}: q must be at least 1")));
        }
        if self.family == GarchFamily::Arch && self.p != 0 {
            return Err(invalid(format!("{self}: ARCH models have p = 0")));
        }
        if self.p > cap || self.q > cap {
            return Err(invalid(format!("{self}: orders are capped at {cap}")));
        }
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        let shocks = match self.family {
            GarchFamily::Egarch => 2 * self.q,
            _ => self.q,
        };
        1 + shocks + self.p + usize::from(self.innovation == Innovation::StudentT)
    }

    fn param_names(&self) -> Vec<String> {
        let mut names = vec!["omega".to_string()];
        names.extend((1..=self.q).map(|j| format!("alpha{j}")));
        if self.family == GarchFamily::Egarch {
            names.extend((1..=self.q).map(|j| format!("phi{j}")));
        }
        names.extend((1..=self.p).map(|i| format!("beta{i}")));
        if self.innovation == Innovation::StudentT {
            names.push("shape".into());
        }
        names
    }

    fn layout(&self) -> Result<Parameterization> {
        let mut blocks = Vec::new();
        match self.family {
            GarchFamily::Arch | GarchFamily::Garch => {
                blocks.push(Transform::Lower { lo: 0.0 });
                blocks.push(Transform::Simplex {
                    len: self.q + self.p,
                    cap: PERSISTENCE_CAP,
                });
            }
            GarchFamily::Egarch => {
                blocks.extend(std::iter::repeat_n(Transform::Identity, 1 + 2 * self.q));
                if self.p > 0 {
                    blocks.push(Transform::Stationary { len: self.p });
                }
            }
        }
        if self.innovation == Innovation::StudentT {
            blocks.push(Transform::Lower { lo: MIN_SHAPE });
        }
        Parameterization::new(self.param_names(), blocks)
    }
}

impl fmt::Display for GarchSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = if self.innovation == Innovation::StudentT {
            "t-"
        } else {
            ""
        };
        match self.family {
            GarchFamily::Arch => write!(f, "{t}ARCH({})", self.q),
            GarchFamily::Garch => write!(f, "{t}GARCH({},{})", self.p, self.q),
            GarchFamily::Egarch => write!(f, "{t}EGARCH({},{})", self.p, self.q),
        }
    }
}

/// Model coefficients in natural units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarchParams {
    pub omega: f64,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// EGARCH asymmetry terms; empty otherwise.
    pub phi: Vec<f64>,
    /// Student-t degrees of freedom.
    pub shape: Option<f64>,
}

impl GarchParams {
    fn from_vector(spec: &GarchSpec, theta: &[f64]) -> Self {
        let q = spec.q;
        let mut i = 1;
        let alpha = theta[i..i + q].to_vec();
        i += q;
        let phi = if spec.family == GarchFamily::Egarch {
            let v = theta[i..i + q].to_vec();
            i += q;
            v
        } else {
            Vec::new()
        };
        let beta = theta[i..i + spec.p].to_vec();
        i += spec.p;
        let shape = (spec.innovation == Innovation::StudentT).then(|| theta[i]);
        Self {
            omega: theta[0],
            alpha,
            beta,
            phi,
            shape,
        }
    }

    fn to_vector(&self) -> Vec<f64> {
        let mut v = vec![self.omega];
        v.extend(&self.alpha);
        v.extend(&self.phi);
        v.extend(&self.beta);
        v.extend(self.shape);
        v
    }

    pub fn persistence(&self) -> f64 {
        self.alpha.iter().sum::<f64>() + self.beta.iter().sum::<f64>()
    }

    pub(crate) fn check(&self, spec: &GarchSpec) -> Result<()> {
        spec.validate_with_cap(usize::MAX)?;
        let egarch = spec.family == GarchFamily::Egarch;
        if self.alpha.len() != spec.q
            || self.beta.len() != spec.p
            || self.phi.len() != if egarch { spec.q } else { 0 }
            || self.shape.is_some() != (spec.innovation == Innovation::StudentT)
        {
            return Err(invalid(format!("parameter layout does not match {spec}")));
        }
        if let Some(nu) = self.shape {
            if !(nu > 2.0) {
                return Err(invalid(format!("shape {nu} must exceed 2")));
            }
        }
        if egarch {
            if crate::arima::max_inverse_root(&self.beta) >= 1.0 {
                return Err(invalid("EGARCH beta is not stationary"));
            }
        } else {
            if !(self.omega > 0.0) || self.alpha.iter().chain(&self.beta).any(|&c| c < 0.0) {
                return Err(invalid("GARCH needs omega > 0 and non-negative alpha, beta"));
            }
            if self.persistence() >= 1.0 {
                return Err(invalid(format!("persistence {} is not below 1", self.persistence())));
            }
        }
        Ok(())
    }
}

/// `E|Z|` for the innovation law (unit variance).
pub fn expected_abs(shape: Option<f64>) -> f64 {
    match shape {
        None => (2.0 / PI).sqrt(),
        Some(nu) => {
            2.0 * (nu - 2.0).sqrt() * (ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0)).exp() / (PI.sqrt() * (nu - 1.0))
        }
    }
}

/// Log density of a unit-variance Student-t at `z`.
pub fn standardized_t_log_density(z: f64, nu: f64) -> f64 {
    ln_gamma((nu + 1.0) / 2.0)
        - ln_gamma(nu / 2.0)
        - 0.5 * (PI * (nu - 2.0)).ln()
        - 0.5 * (nu + 1.0) * (1.0 + z * z / (nu - 2.0)).ln()
}

/// EGARCH shock response `g(z) = α z + φ (|z| - E|Z|)`.
pub fn news_impact(alpha: f64, phi: f64, z: f64, expected_abs_z: f64) -> f64 {
    alpha * z + phi * (z.abs() - expected_abs_z)
}

/// Conditional variances for the residuals under `params`.
fn variance_path(spec: &GarchSpec, params: &GarchParams, eps: &[f64], init: f64) -> Vec<f64> {
    let n = eps.len();
    let mut s2 = Vec::with_capacity(n);
    match spec.family {
        GarchFamily::Arch | GarchFamily::Garch => {
            for t in 0..n {
                let mut v = params.omega;
                for (j, a) in params.alpha.iter().enumerate() {
                    v += a * if t > j { eps[t - 1 - j].powi(2) } else { init };
                }
                for (i, b) in params.beta.iter().enumerate() {
                    v += b * if t > i { s2[t - 1 - i] } else { init };
                }
                s2.push(v);
            }
        }
        GarchFamily::Egarch => {
            let eabs = expected_abs(params.shape);
            let log_init = init.ln();
            let mut logs: Vec<f64> = Vec::with_capacity(n);
            for t in 0..n {
                let mut v = params.omega;
                for (i, b) in params.beta.iter().enumerate() {
                    v += b * if t > i { logs[t - 1 - i] } else { log_init };
                }
                for j in 0..spec.q {
                    if t > j {
                        let k = t - 1 - j;
                        let z = eps[k] / s2[k].sqrt();
                        v += news_impact(params.alpha[j], params.phi[j], z, eabs);
                    }
                }
                // keep exp() finite on wild trial points
                let v = v.clamp(-700.0, 700.0);
                logs.push(v);
                s2.push(v.exp());
            }
        }
    }
    s2
}

fn log_likelihood(params: &GarchParams, eps: &[f64], s2: &[f64]) -> f64 {
    match params.shape {
        None => eps
            .iter()
            .zip(s2)
            .map(|(e, v)| -0.5 * ((2.0 * PI).ln() + v.ln() + e * e / v))
            .sum(),
        Some(nu) => eps
            .iter()
            .zip(s2)
            .map(|(e, v)| standardized_t_log_density(e / v.sqrt(), nu) - 0.5 * v.ln())
            .sum(),
    }
}

/// Log-likelihood of `residuals` under fixed parameters, with the
/// recursion started from `mean(ε²)`.
pub fn garch_loglik(residuals: &[f64], spec: &GarchSpec, params: &GarchParams) -> Result<f64> {
    params.check(spec)?;
    if residuals.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let init = second_moment(residuals);
    let s2 = variance_path(spec, params, residuals, init);
    Ok(log_likelihood(params, residuals, &s2))
}

fn second_moment(x: &[f64]) -> f64 {
    x.iter().map(|e| e * e).sum::<f64>() / x.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GarchCriteria {
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    pub aic_per_obs: f64,
    pub bic_per_obs: f64,
}

/// Raw AIC/BIC and the same divided by `n`.
pub fn garch_criteria(loglik: f64, k: usize, n: usize) -> Result<GarchCriteria> {
    if n == 0 {
        return Err(invalid("criteria need n > 0"));
    }
    let c = crate::arima::information_criteria(loglik, k, n);
    let nf = n as f64;
    Ok(GarchCriteria {
        loglik,
        aic: c.aic,
        bic: c.bic,
        aic_per_obs: c.aic / nf,
        bic_per_obs: c.bic / nf,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarchFit {
    pub spec: GarchSpec,
    pub params: GarchParams,
    pub loglik: f64,
    pub param_names: Vec<String>,
    pub estimates: Vec<f64>,
    pub se: Vec<f64>,
    pub tstats: Vec<f64>,
    pub residuals: Vec<f64>,
    pub cond_variance: Vec<f64>,
    pub std_residuals: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub flags: Vec<FitFlag>,
}

impl GarchFit {
    pub fn criteria(&self) -> GarchCriteria {
        garch_criteria(self.loglik, self.spec.num_params(), self.residuals.len()).expect("fit has observations")
    }

    /// `ω / (1 - Σα - Σβ)` for GARCH/ARCH, `exp(ω / (1 - Σβ))` for EGARCH
    /// (the log-variance level); `None` when persistence reaches one.
    pub fn unconditional_variance(&self) -> Option<f64> {
        unconditional_variance(&self.spec, &self.params)
    }

    /// Writes `date,sigma2`.
    pub fn write_variance_csv<W: Write>(&self, dates: &[NaiveDate], out: W) -> Result<()> {
        if dates.len() != self.cond_variance.len() {
            return Err(invalid(format!(
                "{} dates for {} variances",
                dates.len(),
                self.cond_variance.len()
            )));
        }
        write_dated_csv(out, "sigma2", dates, &self.cond_variance)
    }
}

fn unconditional_variance(spec: &GarchSpec, params: &GarchParams) -> Option<f64> {
    match spec.family {
        GarchFamily::Egarch => {
            let b: f64 = params.beta.iter().sum();
            (b < 1.0).then(|| (params.omega / (1.0 - b)).exp())
        }
        _ => {
            let pers = params.persistence();
            (pers < 1.0 - 1e-4).then(|| params.omega / (1.0 - pers))
        }
    }
}

fn initial_guess(spec: &GarchSpec) -> GarchParams {
    let q = spec.q as f64;
    let p = spec.p as f64;
    let shape = (spec.innovation == Innovation::StudentT).then_some(8.0);
    match spec.family {
        GarchFamily::Egarch => GarchParams {
            omega: 0.0,
            alpha: vec![0.0; spec.q],
            phi: vec![0.1 / q; spec.q],
            beta: vec![0.8 / p.max(1.0); spec.p],
            shape,
        },
        _ => {
            let (a, b) = if spec.p > 0 { (0.1, 0.8) } else { (0.3, 0.0) };
            GarchParams {
                omega: 1.0 - a - b,
                alpha: vec![a / q; spec.q],
                beta: vec![b / p.max(1.0); spec.p],
                phi: Vec::new(),
                shape,
            }
        }
    }
}

/// Fits the variance model to mean-zero residuals.
///
/// Estimation runs on `ε / s` with `s² = mean(ε²)`; coefficients, standard
/// errors and the likelihood are mapped back to the input units.
pub fn fit_garch(residuals: &[f64], spec: GarchSpec) -> Result<GarchFit> {
    fit_garch_with_cap(residuals, spec, MAX_GARCH_ORDER)
}

/// [`fit_garch`] with a different cap on `p` and `q`.
pub fn fit_garch_with_cap(residuals: &[f64], spec: GarchSpec, cap: usize) -> Result<GarchFit> {
    spec.validate_with_cap(cap)?;
    let n = residuals.len();
    let needed = 10 * (spec.p + spec.q) + 1;
    if n < needed {
        return Err(Error::InsufficientData { needed, got: n });
    }
    if residuals.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("GARCH residuals".into()));
    }
    let m2 = second_moment(residuals);
    if !(m2 > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let scale = m2.sqrt();
    let eps: Vec<f64> = residuals.iter().map(|e| e / scale).collect();
    let param = spec.layout()?;
    let nf = n as f64;
    let objective = |theta: &[f64]| -> f64 {
        let p = GarchParams::from_vector(&spec, theta);
        let s2 = variance_path(&spec, &p, &eps, 1.0);
        if s2.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return f64::INFINITY;
        }
        -log_likelihood(&p, &eps, &s2) / nf
    };
    let init = initial_guess(&spec).to_vector();
    let res = optim::minimize(objective, &init, &param, optim::DEFAULT_TOL)?;
    let scaled = GarchParams::from_vector(&spec, &res.minimizer);
    let cov = optim::natural_covariance(|t| nf * objective(t), &param, &res.free_minimizer);

    // back to input units
    let mut params = scaled.clone();
    let ln_m2 = m2.ln();
    let dim = param.dim();
    let mut grad_omega = vec![0.0; dim];
    grad_omega[0] = 1.0;
    match spec.family {
        GarchFamily::Egarch => {
            let bsum: f64 = scaled.beta.iter().sum();
            params.omega = scaled.omega + (1.0 - bsum) * ln_m2;
            let off = 1 + 2 * spec.q;
            for g in grad_omega.iter_mut().skip(off).take(spec.p) {
                *g = -ln_m2;
            }
        }
        _ => {
            params.omega = scaled.omega * m2;
            grad_omega[0] = m2;
        }
    }
    let mut se = optim::standard_errors(cov.as_ref(), dim);
    if let Some(c) = cov.as_ref() {
        let mut var = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                var += grad_omega[i] * c[(i, j)] * grad_omega[j];
            }
        }
        se[0] = if var >= 0.0 { var.sqrt() } else { f64::NAN };
    }
    let estimates = params.to_vector();
    let tstats = estimates.iter().zip(&se).map(|(e, s)| e / s).collect();

    let cond_variance: Vec<f64> = variance_path(&spec, &scaled, &eps, 1.0)
        .into_iter()
        .map(|v| v * m2)
        .collect();
    let std_residuals = residuals
        .iter()
        .zip(&cond_variance)
        .map(|(e, v)| e / v.sqrt())
        .collect();
    let loglik = -nf * objective(&res.minimizer) - 0.5 * nf * ln_m2;

    let mut flags = Vec::new();
    if !res.converged {
        flags.push(FitFlag::NotConverged);
    }
    if spec.family != GarchFamily::Egarch {
        if params.persistence() > 1.0 - 1e-4 {
            flags.push(FitFlag::IntegratedVarianceBoundary);
        }
        if spec.p > 0 && params.alpha.iter().sum::<f64>() < 1e-3 {
            flags.push(FitFlag::BetaUnidentified);
        }
    }
    if cov.is_none() {
        flags.push(FitFlag::StandardErrorsUnavailable);
    }

    let fit = GarchFit {
        spec,
        params,
        loglik,
        param_names: param.names().to_vec(),
        estimates,
        se,
        tstats,
        residuals: residuals.to_vec(),
        cond_variance,
        std_residuals,
        converged: res.converged,
        iterations: res.iterations,
        flags,
    };
    if fit.flags.contains(&FitFlag::BetaUnidentified) {
        return Ok(pin_unidentified_beta(fit, cap));
    }
    Ok(fit)
}

/// With no shock response every β on the ridge `ω = (1 - β) σ²` fits
/// equally well; report the β = 0 member when the ARCH fit is as good.
fn pin_unidentified_beta(fit: GarchFit, cap: usize) -> GarchFit {
    let spec = fit.spec;
    let arch = GarchSpec {
        family: GarchFamily::Arch,
        p: 0,
        ..spec
    };
    let sub = match fit_garch_with_cap(&fit.residuals, arch, cap) {
        Ok(sub) if sub.loglik >= fit.loglik - 1e-4 => sub,
        _ => return fit,
    };
    let at = 1 + spec.q;
    let splice = |v: &[f64], fill: f64| {
        let mut out = v[..at].to_vec();
        out.extend(std::iter::repeat_n(fill, spec.p));
        out.extend(&v[at..]);
        out
    };
    let mut params = sub.params;
    params.beta = vec![0.0; spec.p];
    let mut flags = sub.flags;
    flags.push(FitFlag::BetaUnidentified);
    GarchFit {
        spec,
        params,
        loglik: sub.loglik,
        param_names: fit.param_names,
        estimates: splice(&sub.estimates, 0.0),
        se: splice(&sub.se, f64::NAN),
        tstats: splice(&sub.tstats, f64::NAN),
        residuals: fit.residuals,
        cond_variance: sub.cond_variance,
        std_residuals: sub.std_residuals,
        converged: sub.converged,
        iterations: fit.iterations + sub.iterations,
        flags,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarchDiagnostics {
    pub z_acf: AcfResult,
    pub z2_acf: AcfResult,
    pub ljung_box_z: TestResult,
    pub ljung_box_z2: TestResult,
    pub reference: Reference,
    pub ks: KsResult,
    /// `(theoretical, sample)` quantile pairs.
    pub qq: Vec<(f64, f64)>,
}

/// Innovation law implied by the fit.
pub fn innovation_reference(fit: &GarchFit) -> Reference {
    match fit.params.shape {
        Some(df) => Reference::StandardizedT { df },
        None => Reference::STANDARD_NORMAL,
    }
}

/// Diagnostics on the standardized residuals.
pub fn garch_diagnostics(fit: &GarchFit, max_lag: usize) -> Result<GarchDiagnostics> {
    let z = &fit.std_residuals;
    if max_lag == 0 || max_lag >= z.len() {
        return Err(invalid(format!("max_lag must be in 1..{}, got {max_lag}", z.len())));
    }
    let z2: Vec<f64> = z.iter().map(|v| v * v).collect();
    let reference = innovation_reference(fit);
    Ok(GarchDiagnostics {
        z_acf: acf(z, max_lag)?,
        z2_acf: acf(&z2, max_lag)?,
        ljung_box_z: ljung_box(z, max_lag, 0)?,
        ljung_box_z2: ljung_box(&z2, max_lag, 0)?,
        reference,
        ks: ks_test(z, &reference)?,
        qq: crate::data::qq_data(z, &reference, false)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceForecast {
    pub horizon: usize,
    pub sigma2: Vec<f64>,
    /// `-2·σ(h)` and `+2·σ(h)` around a zero mean.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Limit of the forecasts; absent at the persistence boundary.
    pub unconditional_variance: Option<f64>,
    pub band_rule: String,
}

impl VarianceForecast {
    fn new(sigma2: Vec<f64>, unconditional_variance: Option<f64>) -> Self {
        let sd: Vec<f64> = sigma2.iter().map(|v| v.sqrt()).collect();
        Self {
            horizon: sigma2.len(),
            lower: sd.iter().map(|s| -2.0 * s).collect(),
            upper: sd.iter().map(|s| 2.0 * s).collect(),
            sigma2,
            unconditional_variance,
            band_rule: crate::arima::BAND_RULE.to_string(),
        }
    }

    /// Writes `step,sigma2,lower,upper`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Numerical(format!("csv write: {e}"));
        w.write_record(["step", "sigma2", "lower", "upper"]).map_err(err)?;
        for i in 0..self.horizon {
            w.write_record([
                (i + 1).to_string(),
                self.sigma2[i].to_string(),
                self.lower[i].to_string(),
                self.upper[i].to_string(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::Numerical(format!("csv write: {e}")))?;
        Ok(())
    }
}

/// GARCH variance forecasts from chronological histories of `ε²` and `σ²`
/// (most recent last). Future `ε²` are replaced by their forecasts.
pub fn garch_recursion_forecast(
    omega: f64,
    alpha: &[f64],
    beta: &[f64],
    eps2_history: &[f64],
    sigma2_history: &[f64],
    h: usize,
) -> Result<Vec<f64>> {
    if h == 0 {
        return Err(invalid("forecast horizon must be at least 1"));
    }
    if eps2_history.len() < alpha.len() || sigma2_history.len() < beta.len() {
        return Err(invalid("history shorter than the model order"));
    }
    // both buffers chronological; forecasts are appended
    let mut e2 = eps2_history[eps2_history.len() - alpha.len()..].to_vec();
    let mut s2 = sigma2_history[sigma2_history.len() - beta.len()..].to_vec();
    let mut out = Vec::with_capacity(h);
    for _ in 0..h {
        let mut v = omega;
        for (j, a) in alpha.iter().enumerate() {
            v += a * e2[e2.len() - 1 - j];
        }
        for (i, b) in beta.iter().enumerate() {
            v += b * s2[s2.len() - 1 - i];
        }
        out.push(v);
        if !alpha.is_empty() {
            e2.push(v);
        }
        if !beta.is_empty() {
            s2.push(v);
        }
    }
    Ok(out)
}

/// h-step conditional variance forecasts after the last observation.
pub fn forecast_variance(fit: &GarchFit, h: usize) -> Result<VarianceForecast> {
    if h == 0 {
        return Err(invalid("forecast horizon must be at least 1"));
    }
    let p = &fit.params;
    let n = fit.residuals.len();
    let pad = |hist: Vec<f64>, k: usize, fill: f64| -> Vec<f64> {
        let mut v = vec![fill; k.saturating_sub(hist.len())];
        v.extend(hist);
        v
    };
    let init = second_moment(&fit.residuals);
    let sigma2 = match fit.spec.family {
        GarchFamily::Egarch => {
            let eabs = expected_abs(p.shape);
            let logs = pad(
                fit.cond_variance.iter().map(|v| v.ln()).collect(),
                fit.spec.p,
                init.ln(),
            );
            let mut logs = logs[logs.len() - fit.spec.p..].to_vec();
            let z = &fit.std_residuals;
            let mut out = Vec::with_capacity(h);
            for k in 0..h {
                let mut v = p.omega;
                for (i, b) in p.beta.iter().enumerate() {
                    v += b * logs[logs.len() - 1 - i];
                }
                // realized shocks enter only while they are in the past
                for j in 0..fit.spec.q {
                    if j >= k && n + k > j {
                        let zz = z[n + k - 1 - j];
                        v += news_impact(p.alpha[j], p.phi[j], zz, eabs);
                    }
                }
                out.push(v.exp());
                if fit.spec.p > 0 {
                    logs.push(v);
                }
            }
            out
        }
        _ => {
            let e2: Vec<f64> = fit.residuals.iter().map(|e| e * e).collect();
            garch_recursion_forecast(
                p.omega,
                &p.alpha,
                &p.beta,
                &pad(e2, fit.spec.q, init),
                &pad(fit.cond_variance.clone(), fit.spec.p, init),
                h,
            )?
        }
    };
    Ok(VarianceForecast::new(sigma2, fit.unconditional_variance()))
}

/// Simulates `n` innovations after a 1000-step burn-in. Deterministic per seed.
pub fn simulate_garch(spec: &GarchSpec, params: &GarchParams, n: usize, seed: u64) -> Result<Vec<f64>> {
    params.check(spec)?;
    let total = n + GARCH_BURN_IN;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z: Vec<f64> = match params.shape {
        None => (0..total)
            .map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
            .collect(),
        Some(nu) => {
            let t = StudentT::new(nu).map_err(|e| invalid(format!("student-t: {e}")))?;
            let k = ((nu - 2.0) / nu).sqrt();
            (0..total).map(|_| k * t.sample(&mut rng)).collect()
        }
    };
    let start = unconditional_variance(spec, params).unwrap_or(params.omega.abs().max(1e-12));
    let mut eps = Vec::with_capacity(total);
    let mut s2: Vec<f64> = Vec::with_capacity(total);
    let eabs = expected_abs(params.shape);
    for t in 0..total {
        let v = match spec.family {
            GarchFamily::Egarch => {
                let mut lv = params.omega;
                for (i, b) in params.beta.iter().enumerate() {
                    lv += b * if t > i { s2[t - 1 - i].ln() } else { start.ln() };
                }
                for j in 0..spec.q {
                    if t > j {
                        lv += news_impact(params.alpha[j], params.phi[j], z[t - 1 - j], eabs);
                    }
                }
                lv.exp()
            }
            _ => {
                let mut v = params.omega;
                for (j, a) in params.alpha.iter().enumerate() {
                    v += a * if t > j { eps[t - 1 - j] * eps[t - 1 - j] } else { start };
                }
                for (i, b) in params.beta.iter().enumerate() {
                    v += b * if t > i { s2[t - 1 - i] } else { start };
                }
                v
            }
        };
        s2.push(v);
        eps.push(v.sqrt() * z[t]);
    }
    Ok(eps.split_off(GARCH_BURN_IN))
}
