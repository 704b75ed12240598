//! Portmanteau, unit-root, stationarity and ARCH-effect tests.
//!
//! ADF and KPSS p-values come from interpolation in embedded critical-value
//! tables and are censored at the table ends; the censoring side is carried
//! in [`TestResult::censored`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{invalid, Error, Result};
use crate::linalg::ols;
use crate::stats::autocorrelations;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Censoring {
    /// True p-value is at most the reported value.
    Below,
    /// True p-value is at least the reported value.
    Above,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub test_name: String,
    pub null_hypothesis: String,
    pub statistic: f64,
    pub p_value: f64,
    pub lags: usize,
    pub censored: Option<Censoring>,
    pub reject_at_5pct: bool,
}

impl TestResult {
    fn new(name: &str, null: &str, statistic: f64, p_value: f64, lags: usize, censored: Option<Censoring>) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        Self {
            test_name: name.to_string(),
            null_hypothesis: null.to_string(),
            statistic,
            p_value,
            lags,
            censored,
            reject_at_5pct: p_value < 0.05,
        }
    }
}

fn chi2_sf(stat: f64, df: usize) -> f64 {
    if stat <= 0.0 {
        return 1.0;
    }
    let chi = ChiSquared::new(df as f64).expect("positive degrees of freedom");
    chi.sf(stat)
}

/// Default portmanteau lag count: `min(10, n / 5)`, at least 1.
pub fn default_ljung_box_lags(n: usize) -> usize {
    (n / 5).clamp(1, 10)
}

/// Ljung-Box Q statistic with `lags - fit_df` degrees of freedom.
pub fn ljung_box(series: &[f64], lags: usize, fit_df: usize) -> Result<TestResult> {
    let n = series.len();
    if lags == 0 {
        return Err(invalid("lags must be positive"));
    }
    if lags >= n {
        return Err(invalid(format!("lags {lags} must be below series length {n}")));
    }
    if fit_df >= lags {
        return Err(invalid(format!("fit_df {fit_df} must be below lags {lags}")));
    }
    let rho = autocorrelations(series, lags)?;
    let nf = n as f64;
    let q = nf * (nf + 2.0) * (1..=lags).map(|k| rho[k] * rho[k] / (nf - k as f64)).sum::<f64>();
    Ok(TestResult::new(
        "Ljung-Box",
        "no autocorrelation up to the tested lag",
        q,
        chi2_sf(q, lags - fit_df),
        lags,
        None,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdfDeterministic {
    /// Intercept only; used for return series.
    Constant,
    /// Intercept and linear trend; used for level series.
    ConstantTrend,
}

const ADF_SAMPLE_SIZES: [f64; 6] = [25.0, 50.0, 100.0, 250.0, 500.0, 100_000.0];
const ADF_PROBS: [f64; 8] = [0.01, 0.025, 0.05, 0.10, 0.90, 0.95, 0.975, 0.99];

// Dickey-Fuller tau distribution quantiles; rows are sample sizes, columns
// follow ADF_PROBS.
#[allow(clippy::approx_constant)]
const ADF_TAU_CONSTANT: [[f64; 8]; 6] = [
    [-3.75, -3.33, -3.00, -2.63, -0.37, 0.00, 0.34, 0.72],
    [-3.58, -3.22, -2.93, -2.60, -0.40, -0.03, 0.29, 0.66],
    [-3.51, -3.17, -2.89, -2.58, -0.42, -0.05, 0.26, 0.63],
    [-3.46, -3.14, -2.88, -2.57, -0.42, -0.06, 0.24, 0.62],
    [-3.44, -3.13, -2.87, -2.57, -0.43, -0.07, 0.24, 0.61],
    [-3.43, -3.12, -2.86, -2.57, -0.44, -0.07, 0.23, 0.60],
];
const ADF_TAU_TREND: [[f64; 8]; 6] = [
    [-4.38, -3.95, -3.60, -3.24, -1.14, -0.80, -0.50, -0.15],
    [-4.15, -3.80, -3.50, -3.18, -1.19, -0.87, -0.58, -0.24],
    [-4.04, -3.73, -3.45, -3.15, -1.22, -0.90, -0.62, -0.28],
    [-3.99, -3.69, -3.43, -3.13, -1.23, -0.92, -0.64, -0.31],
    [-3.98, -3.68, -3.42, -3.13, -1.24, -0.93, -0.65, -0.32],
    [-3.96, -3.66, -3.41, -3.12, -1.25, -0.94, -0.66, -0.33],
];

fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    let last = xs.len() - 1;
    if x >= xs[last] {
        return ys[last];
    }
    let i = xs.windows(2).position(|w| x >= w[0] && x <= w[1]).unwrap_or(last - 1);
    let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] + t * (ys[i + 1] - ys[i])
}

/// Interpolates a p-value from increasing critical values, censoring outside
/// the table.
fn table_p_value(crit: &[f64], probs: &[f64], stat: f64) -> (f64, Option<Censoring>) {
    let last = crit.len() - 1;
    if stat < crit[0] {
        (
            probs[0],
            Some(if probs[0] < probs[last] {
                Censoring::Below
            } else {
                Censoring::Above
            }),
        )
    } else if stat > crit[last] {
        (
            probs[last],
            Some(if probs[0] < probs[last] {
                Censoring::Above
            } else {
                Censoring::Below
            }),
        )
    } else {
        (interp(crit, probs, stat), None)
    }
}

/// Default augmentation order `⌊(n-1)^{1/3}⌋`.
pub fn default_adf_lags(n: usize) -> usize {
    ((n.saturating_sub(1)) as f64).cbrt().floor() as usize
}

/// Augmented Dickey-Fuller test of a unit root.
///
/// Regresses `Δx_t` on `x_{t-1}`, `lag_order` lagged differences and the
/// deterministic terms; the statistic is the t-ratio of `x_{t-1}`.
pub fn adf_test(series: &[f64], lag_order: usize, deterministic: AdfDeterministic) -> Result<TestResult> {
    let n = series.len();
    let n_det = match deterministic {
        AdfDeterministic::Constant => 1,
        AdfDeterministic::ConstantTrend => 2,
    };
    let n_reg = 1 + lag_order + n_det;
    // observations left after differencing and lagging
    let m = n.saturating_sub(lag_order + 1);
    if n <= lag_order + 2 || m <= n_reg {
        return Err(Error::InsufficientData {
            needed: n_reg + lag_order + 2,
            got: n,
        });
    }
    let diff: Vec<f64> = series.windows(2).map(|w| w[1] - w[0]).collect();
    let y = DVector::from_iterator(m, (0..m).map(|i| diff[i + lag_order]));
    let x = DMatrix::from_fn(m, n_reg, |i, j| {
        let t = i + lag_order; // index into diff
        match j {
            0 => series[t],
            1 => 1.0,
            2 if n_det == 2 => (t + 1) as f64,
            _ => {
                let lag = j - n_det; // 1-based lag of the difference
                diff[t - lag]
            }
        }
    });
    let fit = ols(&x, &y)?;
    let stat = fit.coef[0] / fit.se[0];
    if !stat.is_finite() {
        return Err(Error::Collinear);
    }
    let table = match deterministic {
        AdfDeterministic::Constant => &ADF_TAU_CONSTANT,
        AdfDeterministic::ConstantTrend => &ADF_TAU_TREND,
    };
    let crit: Vec<f64> = (0..ADF_PROBS.len())
        .map(|c| {
            let col: Vec<f64> = table.iter().map(|row| row[c]).collect();
            interp(&ADF_SAMPLE_SIZES, &col, m as f64)
        })
        .collect();
    let (p, censored) = table_p_value(&crit, &ADF_PROBS, stat);
    Ok(TestResult::new(
        "Augmented Dickey-Fuller",
        "unit root",
        stat,
        p,
        lag_order,
        censored,
    ))
}

const KPSS_CRIT: [f64; 4] = [0.347, 0.463, 0.574, 0.739];
const KPSS_PROBS: [f64; 4] = [0.10, 0.05, 0.025, 0.01];

/// Bartlett bandwidth `⌊4 (n/100)^{1/4}⌋`.
pub fn kpss_bandwidth(n: usize) -> usize {
    (4.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

/// KPSS test of level stationarity with a Newey-West long-run variance.
pub fn kpss_test(series: &[f64]) -> Result<TestResult> {
    let n = series.len();
    if n < 10 {
        return Err(Error::InsufficientData { needed: 10, got: n });
    }
    let nf = n as f64;
    let mean = series.iter().sum::<f64>() / nf;
    let e: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let mut partial = 0.0;
    let mut eta = 0.0;
    for v in &e {
        partial += v;
        eta += partial * partial;
    }
    eta /= nf * nf;
    let l = kpss_bandwidth(n).min(n - 1);
    let mut s2 = e.iter().map(|v| v * v).sum::<f64>() / nf;
    for lag in 1..=l {
        let w = 1.0 - lag as f64 / (l as f64 + 1.0);
        let gamma: f64 = e[lag..].iter().zip(&e[..n - lag]).map(|(a, b)| a * b).sum();
        s2 += 2.0 * w * gamma / nf;
    }
    if !(s2 > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let stat = eta / s2;
    let (p, censored) = table_p_value(&KPSS_CRIT, &KPSS_PROBS, stat);
    Ok(TestResult::new("KPSS", "level stationarity", stat, p, l, censored))
}

/// Engle's ARCH-LM test: `m · R²` from regressing `ε_t²` on its own lags,
/// where `m` is the number of regression observations.
pub fn arch_lm_test(residuals: &[f64], lags: usize) -> Result<TestResult> {
    let n = residuals.len();
    if lags == 0 {
        return Err(invalid("lags must be positive"));
    }
    if n <= lags + 1 + lags {
        return Err(Error::InsufficientData {
            needed: 2 * lags + 2,
            got: n,
        });
    }
    let sq: Vec<f64> = residuals.iter().map(|e| e * e).collect();
    let m = n - lags;
    let y = DVector::from_iterator(m, (0..m).map(|i| sq[i + lags]));
    let x = DMatrix::from_fn(m, lags + 1, |i, j| if j == 0 { 1.0 } else { sq[i + lags - j] });
    let fit = ols(&x, &y)?;
    if !fit.r_squared.is_finite() {
        return Err(Error::Numerical("degenerate ARCH-LM regression".into()));
    }
    let stat = m as f64 * fit.r_squared.max(0.0);
    Ok(TestResult::new(
        "ARCH-LM",
        "no ARCH effects",
        stat,
        chi2_sf(stat, lags),
        lags,
        None,
    ))
}
