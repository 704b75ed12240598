//! Autocorrelation machinery and the Kolmogorov-Smirnov test.

use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal, StudentsT};

use crate::error::{invalid, Error, Result};

/// Reference law for QQ plots and goodness-of-fit tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum Reference {
    Normal {
        mean: f64,
        sd: f64,
    },
    /// Standard Student-t with `df` degrees of freedom.
    StudentT {
        df: f64,
    },
    /// Student-t rescaled to unit variance; requires `df > 2`.
    StandardizedT {
        df: f64,
    },
}

impl Reference {
    pub const STANDARD_NORMAL: Reference = Reference::Normal { mean: 0.0, sd: 1.0 };

    pub fn validate(&self) -> Result<()> {
        match *self {
            Reference::Normal { mean, sd } => {
                if !(sd > 0.0 && sd.is_finite() && mean.is_finite()) {
                    return Err(invalid(format!("normal reference needs sd > 0, got {sd}")));
                }
            }
            Reference::StudentT { df } => {
                if !(df > 0.0) {
                    return Err(invalid(format!("student-t reference needs df > 0, got {df}")));
                }
            }
            Reference::StandardizedT { df } => {
                if !(df > 2.0) {
                    return Err(invalid(format!("unit-variance student-t needs df > 2, got {df}")));
                }
            }
        }
        Ok(())
    }

    fn with<R>(&self, normal: impl Fn(&Normal) -> R, t: impl Fn(&StudentsT) -> R) -> R {
        match *self {
            Reference::Normal { mean, sd } => normal(&Normal::new(mean, sd).expect("validated normal")),
            Reference::StudentT { df } => t(&StudentsT::new(0.0, 1.0, df).expect("validated t")),
            Reference::StandardizedT { df } => {
                let scale = ((df - 2.0) / df).sqrt();
                t(&StudentsT::new(0.0, scale, df).expect("validated t"))
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.with(|d| d.cdf(x), |d| d.cdf(x))
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.with(|d| d.pdf(x), |d| d.pdf(x))
    }

    pub fn quantile(&self, p: f64) -> f64 {
        self.with(|d| d.inverse_cdf(p), |d| d.inverse_cdf(p))
    }
}

/// Sample autocorrelations (or partial autocorrelations) with the
/// white-noise band `±1.96/√n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcfResult {
    pub lags: Vec<usize>,
    pub values: Vec<f64>,
    pub conf_bound: f64,
}

impl AcfResult {
    /// Writes `lag,value,conf_bound` CSV.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Numerical(format!("csv write: {e}"));
        w.write_record(["lag", "value", "conf_bound"]).map_err(err)?;
        for (l, v) in self.lags.iter().zip(&self.values) {
            w.write_record([l.to_string(), v.to_string(), self.conf_bound.to_string()])
                .map_err(err)?;
        }
        w.flush().map_err(|e| Error::Numerical(format!("csv write: {e}")))?;
        Ok(())
    }

    /// Number of lags (excluding lag 0) outside the band.
    pub fn exceedances(&self) -> usize {
        self.lags
            .iter()
            .zip(&self.values)
            .filter(|(&l, v)| l > 0 && v.abs() > self.conf_bound)
            .count()
    }
}

fn check_lags(n: usize, max_lag: usize) -> Result<()> {
    if max_lag == 0 {
        return Err(invalid("max_lag must be positive"));
    }
    if max_lag >= n {
        return Err(invalid(format!("max_lag {max_lag} must be below series length {n}")));
    }
    Ok(())
}

/// Biased-denominator autocorrelations for lags `0..=max_lag`.
pub(crate) fn autocorrelations(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let denom: f64 = centered.iter().map(|x| x * x).sum();
    if !(denom > 0.0) || !denom.is_finite() {
        return Err(Error::ZeroVariance);
    }
    Ok((0..=max_lag)
        .map(|k| {
            if k == 0 {
                1.0
            } else {
                let num: f64 = centered[..n - k].iter().zip(&centered[k..]).map(|(a, b)| a * b).sum();
                (num / denom).clamp(-1.0, 1.0)
            }
        })
        .collect())
}

pub fn acf(series: &[f64], max_lag: usize) -> Result<AcfResult> {
    check_lags(series.len(), max_lag)?;
    let values = autocorrelations(series, max_lag)?;
    Ok(AcfResult {
        lags: (0..=max_lag).collect(),
        values,
        conf_bound: 1.96 / (series.len() as f64).sqrt(),
    })
}

/// Durbin-Levinson recursion on autocorrelations `rho[0..=k]` (with
/// `rho[0] = 1`). Returns the order-k autoregressive coefficients and the
/// partial autocorrelations for lags `1..=k`.
pub fn durbin_levinson(rho: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let k_max = rho.len().saturating_sub(1);
    let mut phi: Vec<f64> = Vec::with_capacity(k_max);
    let mut partial = Vec::with_capacity(k_max);
    let mut v = 1.0;
    for k in 1..=k_max {
        let num = rho[k] - phi.iter().enumerate().map(|(j, p)| p * rho[k - 1 - j]).sum::<f64>();
        if !(v > 0.0) {
            return Err(Error::Numerical(format!(
                "Durbin-Levinson breakdown at lag {k} (prediction variance {v})"
            )));
        }
        let kk = num / v;
        let prev = phi.clone();
        for j in 0..phi.len() {
            phi[j] = prev[j] - kk * prev[prev.len() - 1 - j];
        }
        phi.push(kk);
        partial.push(kk);
        v *= 1.0 - kk * kk;
    }
    Ok((phi, partial))
}

/// Partial autocorrelations for lags `1..=max_lag`.
pub fn pacf(series: &[f64], max_lag: usize) -> Result<AcfResult> {
    check_lags(series.len(), max_lag)?;
    let rho = autocorrelations(series, max_lag)?;
    let (_, partial) = durbin_levinson(&rho)?;
    Ok(AcfResult {
        lags: (1..=max_lag).collect(),
        values: partial.into_iter().map(|v| v.clamp(-1.0, 1.0)).collect(),
        conf_bound: 1.96 / (series.len() as f64).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub distance: f64,
    pub p_value: f64,
}

/// Asymptotic Kolmogorov survival function `2 Σ (-1)^{j-1} exp(-2 j² λ²)`,
/// truncated at 100 terms.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    // the alternating series has not converged at 100 terms below this
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov-Smirnov test against a fully specified reference.
pub fn ks_test(sample: &[f64], reference: &Reference) -> Result<KsResult> {
    reference.validate()?;
    let n = sample.len();
    if n == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("KS sample".into()));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mut distance: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = reference.cdf(x);
        let above = (i + 1) as f64 / nf - f;
        let below = f - i as f64 / nf;
        distance = distance.max(above).max(below);
    }
    let distance = distance.clamp(0.0, 1.0);
    Ok(KsResult {
        distance,
        p_value: kolmogorov_survival(nf.sqrt() * distance),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn acf_white_noise_inside_band() {
        let n = 10_000;
        let x = noise(n, 11);
        let r = acf(&x, 20).unwrap();
        assert_eq!(r.values[0], 1.0);
        let bound = 3.0 / (n as f64).sqrt();
        let exceed = r.values[1..].iter().filter(|v| v.abs() >= bound).count();
        assert!(exceed <= 1, "{exceed} exceedances");
        assert!((r.conf_bound - 1.96 / 100.0).abs() < 1e-15);
    }

    #[test]
    fn acf_alternating() {
        let x: Vec<f64> = (0..200).map(|t| if t % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let r = acf(&x, 3).unwrap();
        assert!((r.values[1] + 1.0).abs() < 0.01);
    }

    #[test]
    fn acf_errors() {
        assert!(acf(&[1.0, 2.0, 3.0], 3).is_err());
        assert!(matches!(acf(&[2.0; 10], 2).unwrap_err(), Error::ZeroVariance));
        assert!(pacf(&[2.0; 10], 2).is_err());
    }

    #[test]
    fn pacf_of_ar1() {
        let n = 20_000;
        let e = noise(n + 200, 5);
        let mut x = vec![0.0; n + 200];
        for t in 1..x.len() {
            x[t] = 0.6 * x[t - 1] + e[t];
        }
        let x = &x[200..];
        let r = pacf(x, 10).unwrap();
        assert!((r.values[0] - 0.6).abs() < 0.02);
        let bound = 3.0 / (n as f64).sqrt();
        assert!(r.values[1..].iter().all(|v| v.abs() < bound), "{:?}", r.values);
        let a = acf(x, 1).unwrap();
        assert_eq!(a.values[1], r.values[0]);
    }

    #[test]
    fn pacf_white_noise_small() {
        let x = noise(10_000, 9);
        let r = pacf(&x, 20).unwrap();
        let bound = 3.0 / 100.0;
        assert!(r.values.iter().filter(|v| v.abs() >= bound).count() <= 1);
    }

    #[test]
    fn ks_single_point_at_median() {
        let r = ks_test(&[0.0], &Reference::STANDARD_NORMAL).unwrap();
        assert!((r.distance - 0.5).abs() < 1e-15);
        let r = ks_test(&[3.0], &Reference::Normal { mean: 3.0, sd: 2.0 }).unwrap();
        assert!((r.distance - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ks_rejects_bad_reference() {
        assert!(ks_test(&[0.0], &Reference::Normal { mean: 0.0, sd: 0.0 }).is_err());
        assert!(ks_test(&[0.0], &Reference::StudentT { df: -1.0 }).is_err());
        assert!(ks_test(&[], &Reference::STANDARD_NORMAL).is_err());
    }

    #[test]
    fn ks_location_scale_invariance() {
        let x = noise(300, 2);
        let a = ks_test(&x, &Reference::STANDARD_NORMAL).unwrap();
        let y: Vec<f64> = x.iter().map(|v| 2.5 * v - 7.0).collect();
        let b = ks_test(&y, &Reference::Normal { mean: -7.0, sd: 2.5 }).unwrap();
        assert!((a.distance - b.distance).abs() < 1e-12);
    }

    #[test]
    fn kolmogorov_known_values() {
        // K(1.36) ≈ 0.95, K(1.63) ≈ 0.99
        assert!((kolmogorov_survival(1.358) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_survival(1.628) - 0.01).abs() < 1e-3);
        assert_eq!(kolmogorov_survival(0.0), 1.0);
    }

    #[test]
    fn standardized_t_has_unit_variance_quantiles() {
        let r = Reference::StandardizedT { df: 5.0 };
        let t = Reference::StudentT { df: 5.0 };
        let scale = (3.0f64 / 5.0).sqrt();
        assert!((r.quantile(0.9) - scale * t.quantile(0.9)).abs() < 1e-8);
        assert!(Reference::StandardizedT { df: 2.0 }.validate().is_err());
    }
}
