//! Acceptance criteria 1-10. Prints one PASS/FAIL line per criterion and
//! exits nonzero when any criterion fails.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use volmetrics::arima::{
    fit_arima, forecast_arima, information_criteria, simulate_arima, ArimaCoefficients, ArimaSpec,
};
use volmetrics::garch::{
    fit_garch, forecast_variance, garch_criteria, garch_loglik, simulate_garch, GarchParams, GarchSpec, Innovation,
};
use volmetrics::hypothesis::{adf_test, arch_lm_test, kpss_test, ljung_box, AdfDeterministic};
use volmetrics::mgarch::{dcc_forecast, fit_dcc, simulate_dcc};
use volmetrics::pipeline::{run_pipeline, PipelineConfig};
use volmetrics::stats::{ks_test, pacf, Reference};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn normals(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
        .collect()
}

fn g11(omega: f64, alpha: f64, beta: f64) -> GarchParams {
    GarchParams {
        omega,
        alpha: vec![alpha],
        beta: vec![beta],
        phi: vec![],
        shape: None,
    }
}

fn criterion_1() -> Outcome {
    let c = information_criteria(1243.12, 6, 614);
    let ok = (-2474.30..=-2474.20).contains(&c.aic) && (-2447.80..=-2447.60).contains(&c.bic);
    outcome(ok, format!("AIC {:.3}, BIC {:.3}", c.aic, c.bic))
}

fn criterion_2() -> Outcome {
    let c = garch_criteria(1305.355, 4, 614).expect("n > 0");
    outcome(
        (c.aic_per_obs + 4.239).abs() <= 0.005,
        format!("aic_per_obs {:.4}", c.aic_per_obs),
    )
}

fn within_3se(estimates: &[f64], se: &[f64], truth: &[f64]) -> (usize, usize) {
    let hits = estimates
        .iter()
        .zip(se)
        .zip(truth)
        .filter(|((e, s), t)| s.is_finite() && (*e - *t).abs() <= 3.0 * *s)
        .count();
    (hits, truth.len())
}

fn criterion_3() -> Outcome {
    let spec = ArimaSpec::new(2, 0, 2);
    let coef = ArimaCoefficients {
        intercept: 0.0,
        ar: vec![-0.6989, -0.7508],
        ma: vec![0.7024, 0.6426],
    };
    let truth = [0.0, -0.6989, -0.7508, 0.7024, 0.6426];
    let counts: Vec<(usize, usize)> = (0..50u64)
        .into_par_iter()
        .map(|seed| {
            let s = simulate_arima(spec, &coef, 0.0325, 5000, 1000 + seed).expect("valid simulation");
            match fit_arima(&s, spec) {
                Ok(fit) => within_3se(&fit.estimates, &fit.se, &truth),
                Err(_) => (0, truth.len()),
            }
        })
        .collect();
    let (hit, total) = counts.iter().fold((0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let rate = hit as f64 / total as f64;
    outcome(
        rate >= 0.9,
        format!("{hit}/{total} estimates within 3 SE ({:.1}%)", 100.0 * rate),
    )
}

fn criterion_4() -> Outcome {
    let spec = GarchSpec::garch(1, 1);
    let truth = g11(5.3e-5, 0.12, 0.83);
    let tv = [5.3e-5, 0.12, 0.83];
    let counts: Vec<(usize, usize)> = (0..50u64)
        .into_par_iter()
        .map(|seed| {
            let x = simulate_garch(&spec, &truth, 10_000, 2000 + seed).expect("valid simulation");
            match fit_garch(&x, spec) {
                Ok(fit) => within_3se(&fit.estimates, &fit.se, &tv),
                Err(_) => (0, tv.len()),
            }
        })
        .collect();
    let (hit, total) = counts.iter().fold((0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let rate = hit as f64 / total as f64;
    let long = simulate_garch(&spec, &truth, 200_000, 7).expect("valid simulation");
    let var = long.iter().map(|v| v * v).sum::<f64>() / long.len() as f64;
    let target = 5.3e-5 / (1.0 - 0.95);
    let rel = (var / target - 1.0).abs();
    outcome(
        rate >= 0.9 && rel <= 0.05,
        format!(
            "{hit}/{total} within 3 SE ({:.1}%); long-run variance {var:.4e} vs {target:.4e} ({:.1}% off)",
            100.0 * rate,
            100.0 * rel
        ),
    )
}

fn criterion_5() -> Outcome {
    let spec_t = GarchSpec::garch(1, 1).with_innovation(Innovation::StudentT);
    let truth = GarchParams {
        shape: Some(6.0),
        ..g11(5.3e-5, 0.12, 0.83)
    };
    let results: Vec<(bool, bool)> = (0..30u64)
        .into_par_iter()
        .map(|seed| {
            let x = simulate_garch(&spec_t, &truth, 10_000, 3000 + seed).expect("valid simulation");
            let shape_ok = fit_garch(&x, spec_t)
                .ok()
                .and_then(|f| f.params.shape)
                .is_some_and(|nu| (4.5..=8.0).contains(&nu));
            let rejects = fit_garch(&x, GarchSpec::garch(1, 1))
                .ok()
                .and_then(|f| ks_test(&f.std_residuals, &Reference::STANDARD_NORMAL).ok())
                .is_some_and(|k| k.p_value < 0.05);
            (shape_ok, rejects)
        })
        .collect();
    let shape_hits = results.iter().filter(|r| r.0).count();
    let ks_hits = results.iter().filter(|r| r.1).count();
    outcome(
        shape_hits >= 24 && ks_hits >= 24,
        format!("shape in [4.5, 8] for {shape_hits}/30; KS rejects normality for {ks_hits}/30"),
    )
}

fn criterion_6() -> Outcome {
    let s = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.3, 0.5, 1.0, 0.4, 0.3, 0.4, 1.0]);
    let g = vec![g11(5.3e-5, 0.12, 0.83), g11(4e-5, 0.1, 0.85), g11(6e-5, 0.08, 0.88)];
    let results: Vec<(bool, bool)> = (0..30u64)
        .into_par_iter()
        .map(|seed| {
            let m = simulate_dcc(&g, 0.268, 0.571, &s, 5000, 4000 + seed).expect("valid simulation");
            let Ok(fit) = fit_dcc(&m) else {
                return (false, false);
            };
            let recovered = (fit.a - 0.268).abs() <= 3.0 * fit.se[0] && (fit.b - 0.571).abs() <= 3.0 * fit.se[1];
            let invariants = (0..m.len()).all(|t| {
                let p = fit.p_at(t);
                let h = fit.h_at(t);
                (0..3).all(|i| (p[(i, i)] - 1.0).abs() <= 1e-12)
                    && h.clone().symmetric_eigen().eigenvalues.iter().all(|l| *l > 0.0)
            });
            (recovered, invariants)
        })
        .collect();
    let rec = results.iter().filter(|r| r.0).count();
    let inv = results.iter().filter(|r| r.1).count();
    outcome(
        rec >= 24 && inv == 30,
        format!("(a, b) within 3 SE for {rec}/30; unit-diagonal P_t and PD H_t for {inv}/30"),
    )
}

fn criterion_7() -> Outcome {
    let reps = 500u64;
    let n = 500;
    let rejections: Vec<(bool, bool, bool)> = (0..reps)
        .into_par_iter()
        .map(|seed| {
            let x = normals(n, 5000 + seed);
            (
                ljung_box(&x, 10, 0).expect("valid").p_value < 0.05,
                arch_lm_test(&x, 5).expect("valid").p_value < 0.05,
                ks_test(&x, &Reference::STANDARD_NORMAL).expect("valid").p_value < 0.05,
            )
        })
        .collect();
    let size = |f: fn(&(bool, bool, bool)) -> bool| rejections.iter().filter(|r| f(r)).count() as f64 / reps as f64;
    let (lb, lm, ks) = (size(|r| r.0), size(|r| r.1), size(|r| r.2));
    let in_band = |s: f64| (0.02..=0.08).contains(&s);

    let adf_hits = (0..200u64)
        .into_par_iter()
        .filter(|&seed| {
            let e = normals(n, 6000 + seed);
            let mut x = vec![0.0; n];
            for t in 1..n {
                x[t] = 0.5 * x[t - 1] + e[t];
            }
            adf_test(&x, 4, AdfDeterministic::Constant).expect("valid").p_value < 0.05
        })
        .count();
    let kpss_hits = (0..200u64)
        .into_par_iter()
        .filter(|&seed| {
            let e = normals(n, 7000 + seed);
            let x: Vec<f64> = e
                .iter()
                .scan(0.0, |acc, v| {
                    *acc += v;
                    Some(*acc)
                })
                .collect();
            kpss_test(&x).expect("valid").p_value < 0.05
        })
        .count();
    outcome(
        in_band(lb) && in_band(lm) && in_band(ks) && adf_hits >= 190 && kpss_hits >= 180,
        format!(
            "size LB {:.1}%, ARCH-LM {:.1}%, KS {:.1}%; ADF rejects AR(1) {adf_hits}/200; KPSS flags random walk {kpss_hits}/200",
            100.0 * lb,
            100.0 * lm,
            100.0 * ks
        ),
    )
}

fn criterion_8() -> Outcome {
    let spec = ArimaSpec::new(2, 0, 2);
    let coef = ArimaCoefficients {
        intercept: 0.001,
        ar: vec![-0.6989, -0.7508],
        ma: vec![0.7024, 0.6426],
    };
    let s = simulate_arima(spec, &coef, 0.0325, 2000, 8).expect("valid simulation");
    let fit = fit_arima(&s, spec).expect("fit");
    let fc = forecast_arima(&fit, 1000).expect("forecast");
    let mean = fit.mean;
    let arima_gap = (fc.point[999] - mean).abs();
    let bands =
        (0..1000).all(|i| fc.lower[i] == fc.point[i] - 2.0 * fc.sd[i] && fc.upper[i] == fc.point[i] + 2.0 * fc.sd[i]);

    let x = simulate_garch(&GarchSpec::garch(1, 1), &g11(5.3e-5, 0.12, 0.83), 3000, 8).expect("valid simulation");
    let g = fit_garch(&x, GarchSpec::garch(1, 1)).expect("fit");
    let vf = forecast_variance(&g, 1000).expect("forecast");
    let p = &g.params;
    let limit = p.omega / (1.0 - p.persistence());
    let garch_gap = (vf.sigma2[999] - limit).abs();
    let vbands =
        (0..1000).all(|i| vf.upper[i] == 2.0 * vf.sigma2[i].sqrt() && vf.lower[i] == -2.0 * vf.sigma2[i].sqrt());

    let s3 = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.3, 0.5, 1.0, 0.4, 0.3, 0.4, 1.0]);
    let gs = vec![g11(5.3e-5, 0.12, 0.83); 3];
    let m = simulate_dcc(&gs, 0.268, 0.571, &s3, 2000, 8).expect("valid simulation");
    let dcc = fit_dcc(&m).expect("fit");
    let df = dcc_forecast(&dcc, 500).expect("forecast");
    let sm = dcc.s_matrix();
    let d: Vec<f64> = (0..3).map(|i| 1.0 / sm[(i, i)].sqrt()).collect();
    let target = DMatrix::from_fn(3, 3, |i, j| sm[(i, j)] * d[i] * d[j]);
    let dcc_gap = (df.correlation_at(499) - target).amax();

    outcome(
        arima_gap < 1e-6 && garch_gap < 1e-6 && dcc_gap < 1e-6 && bands && vbands,
        format!(
            "ARIMA gap {arima_gap:.2e} (h=1000), GARCH gap {garch_gap:.2e} (h=1000), DCC gap {dcc_gap:.2e} (h=500), ±2·sd bands exact: {}",
            bands && vbands
        ),
    )
}

fn yule_walker_last(x: &[f64], k: usize) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let c = |lag: usize| {
        x.iter()
            .zip(&x[lag..])
            .map(|(a, b)| (a - mean) * (b - mean))
            .sum::<f64>()
            / n
    };
    let g: Vec<f64> = (0..=k).map(c).collect();
    let r = DMatrix::from_fn(k, k, |i, j| g[i.abs_diff(j)]);
    let rhs = DVector::from_iterator(k, (1..=k).map(|i| g[i]));
    r.lu().solve(&rhs).expect("nonsingular")[k - 1]
}

fn criterion_9() -> Outcome {
    let mut checks = Vec::new();

    let x: Vec<f64> = {
        let e = normals(400, 9);
        let mut v = vec![0.0; 400];
        for t in 2..400 {
            v[t] = 0.5 * v[t - 1] - 0.3 * v[t - 2] + e[t];
        }
        v
    };
    let pr = pacf(&x, 5).expect("pacf");
    let pacf_gap = (1..=5)
        .map(|k| (pr.values[k - 1] - yule_walker_last(&x, k)).abs())
        .fold(0.0, f64::max);
    checks.push(pacf_gap <= 1e-8);

    let samples = [
        [0.1, -0.4, 1.3, 0.7, -2.0],
        [0.0, 0.25, 0.5, 0.75, 1.0],
        [3.0, -1.0, 2.2, 0.05, -0.6],
    ];
    let mut ks_gap: f64 = 0.0;
    for smp in &samples {
        let r = Reference::STANDARD_NORMAL;
        let n = smp.len() as f64;
        let mut brute: f64 = 0.0;
        for &x in smp.iter() {
            let at = smp.iter().filter(|&&v| v <= x).count() as f64 / n;
            let before = smp.iter().filter(|&&v| v < x).count() as f64 / n;
            let f = r.cdf(x);
            brute = brute.max((at - f).abs()).max((before - f).abs());
        }
        ks_gap = ks_gap.max((ks_test(smp, &r).expect("ks").distance - brute).abs());
    }
    checks.push(ks_gap <= 1e-12);

    let series = [0.3, -0.1, 0.8, -0.6, 0.2, 0.9, -0.4, 0.1, -0.7, 0.5];
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let c0: f64 = series.iter().map(|v| (v - mean).powi(2)).sum();
    let h = 3;
    let q: f64 = (1..=h)
        .map(|k| {
            let ck: f64 = (k..series.len())
                .map(|t| (series[t] - mean) * (series[t - k] - mean))
                .sum();
            (ck / c0).powi(2) / (n - k as f64)
        })
        .sum::<f64>()
        * n
        * (n + 2.0);
    let lb_gap = (ljung_box(&series, h, 0).expect("lb").statistic - q).abs();
    checks.push(lb_gap <= 1e-10);

    let omega = 0.8;
    let ll = garch_loglik(&series, &GarchSpec::garch(1, 1), &g11(omega, 0.0, 0.0)).expect("loglik");
    let closed: f64 = series
        .iter()
        .map(|e| -0.5 * ((2.0 * std::f64::consts::PI * omega).ln() + e * e / omega))
        .sum();
    let ll_gap = (ll - closed).abs();
    checks.push(ll_gap <= 1e-10);

    outcome(
        checks.iter().all(|c| *c),
        format!("PACF {pacf_gap:.1e}, KS {ks_gap:.1e}, Ljung-Box {lb_gap:.1e}, GARCH iid loglik {ll_gap:.1e}"),
    )
}

fn criterion_10() -> Outcome {
    let sample = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/sample/config.json");
    let dir = tempfile::tempdir().expect("temp dir");
    let run = |name: &str| -> Option<Vec<u8>> {
        let mut config = PipelineConfig::from_json_file(&sample).ok()?;
        config.output_dir = dir.path().join(name);
        run_pipeline(&config).ok()?;
        std::fs::read(dir.path().join(name).join("report.json")).ok()
    };
    match (run("first"), run("second")) {
        (Some(a), Some(b)) => outcome(
            a == b,
            format!("two runs, {} and {} bytes, identical: {}", a.len(), b.len(), a == b),
        ),
        _ => outcome(false, "pipeline run failed"),
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("AIC/BIC closure", criterion_1),
        ("per-observation GARCH criteria", criterion_2),
        ("ARIMA(2,0,2) recovery", criterion_3),
        ("GARCH(1,1) recovery", criterion_4),
        ("t-GARCH shape identification", criterion_5),
        ("DCC recovery", criterion_6),
        ("test calibration", criterion_7),
        ("forecast convergence", criterion_8),
        ("oracle equivalences", criterion_9),
        ("pipeline determinism", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = f();
        let secs = start.elapsed().as_secs_f64();
        println!(
            "criterion {:>2} {}: {} ({}; {secs:.1}s)",
            i + 1,
            name,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        if !o.pass {
            failed += 1;
        }
    }
    println!("acceptance: {}/10 passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
