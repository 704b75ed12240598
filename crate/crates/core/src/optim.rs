//! Bound-respecting minimization by reparameterization.
//!
//! Every estimator in the crate minimizes over an unconstrained "free"
//! vector mapped onto its feasible region by a [`Parameterization`]. The
//! search is two-stage: a Nelder-Mead pass to get near the basin, then BFGS
//! with central-difference gradients. Standard errors come from the inverse
//! numerical Hessian in free space, carried to natural space with the
//! Jacobian of the map (delta method).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Per-block map from free reals onto a feasible set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transform {
    Identity,
    /// `x = lo + exp(u)`; with `lo = 0` this is the log transform.
    Lower {
        lo: f64,
    },
    /// Logistic onto the open interval `(lo, hi)`.
    Interval {
        lo: f64,
        hi: f64,
    },
    /// `len` values with `x_i > 0` and `Σ x_i < cap`: `x_i = cap·e^{u_i} / (1 + Σ e^{u_j})`.
    Simplex {
        len: usize,
        cap: f64,
    },
    /// `len` autoregressive coefficients with all roots of `1 - Σ a_i z^i`
    /// outside the unit circle, via partial autocorrelations `tanh(u)`.
    Stationary {
        len: usize,
    },
    /// `len` moving-average coefficients with all roots of `1 + Σ b_i z^i`
    /// outside the unit circle.
    Invertible {
        len: usize,
    },
}

impl Transform {
    fn len(&self) -> usize {
        match *self {
            Transform::Simplex { len, .. } | Transform::Stationary { len } | Transform::Invertible { len } => len,
            _ => 1,
        }
    }

    fn forward(&self, u: &[f64], out: &mut Vec<f64>) {
        match *self {
            Transform::Identity => out.push(u[0]),
            Transform::Lower { lo } => out.push(lo + u[0].exp()),
            Transform::Interval { lo, hi } => out.push(lo + (hi - lo) * logistic(u[0])),
            Transform::Simplex { cap, .. } => {
                // shift by the max exponent so large free values stay finite
                let m = u.iter().copied().fold(0.0, f64::max);
                let e: Vec<f64> = u.iter().map(|v| (v - m).exp()).collect();
                let denom = (-m).exp() + e.iter().sum::<f64>();
                out.extend(e.iter().map(|v| cap * v / denom));
            }
            Transform::Stationary { .. } => out.extend(pacf_to_ar(u)),
            Transform::Invertible { .. } => out.extend(pacf_to_ar(u).into_iter().map(|v| -v)),
        }
    }

    fn inverse(&self, x: &[f64], out: &mut Vec<f64>) -> Result<()> {
        match *self {
            Transform::Identity => out.push(x[0]),
            Transform::Lower { lo } => {
                if !(x[0] > lo) {
                    return Err(invalid(format!("value {} not above {lo}", x[0])));
                }
                out.push((x[0] - lo).ln());
            }
            Transform::Interval { lo, hi } => {
                if !(x[0] > lo && x[0] < hi) {
                    return Err(invalid(format!("value {} outside ({lo}, {hi})", x[0])));
                }
                let p = (x[0] - lo) / (hi - lo);
                out.push((p / (1.0 - p)).ln());
            }
            Transform::Simplex { cap, .. } => {
                let slack = cap - x.iter().sum::<f64>();
                if !(slack > 0.0) || x.iter().any(|&v| !(v > 0.0)) {
                    return Err(invalid(format!("{x:?} not inside simplex with cap {cap}")));
                }
                out.extend(x.iter().map(|v| (v / slack).ln()));
            }
            Transform::Stationary { .. } => out.extend(ar_to_pacf(x)?),
            Transform::Invertible { .. } => {
                let neg: Vec<f64> = x.iter().map(|v| -v).collect();
                out.extend(ar_to_pacf(&neg)?);
            }
        }
        Ok(())
    }
}

fn logistic(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

fn pacf_to_ar(u: &[f64]) -> Vec<f64> {
    let mut phi: Vec<f64> = Vec::with_capacity(u.len());
    for &uk in u {
        let r = uk.tanh();
        let prev = phi.clone();
        for j in 0..prev.len() {
            phi[j] = prev[j] - r * prev[prev.len() - 1 - j];
        }
        phi.push(r);
    }
    phi
}

fn ar_to_pacf(a: &[f64]) -> Result<Vec<f64>> {
    let mut phi = a.to_vec();
    let mut u = vec![0.0; a.len()];
    for k in (0..a.len()).rev() {
        let r = phi[k];
        if !(r.abs() < 1.0) {
            return Err(invalid(format!("coefficients {a:?} are not stationary")));
        }
        u[k] = r.atanh();
        let prev = phi[..k].to_vec();
        for j in 0..k {
            phi[j] = (prev[j] + r * prev[k - 1 - j]) / (1.0 - r * r);
        }
        phi.truncate(k);
    }
    Ok(u)
}

/// Named parameters and the transforms that make them unconstrained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameterization {
    names: Vec<String>,
    blocks: Vec<Transform>,
}

impl Parameterization {
    pub fn new(names: Vec<String>, blocks: Vec<Transform>) -> Result<Self> {
        let dim: usize = blocks.iter().map(Transform::len).sum();
        if dim != names.len() {
            return Err(invalid(format!(
                "{} names for {dim} transformed parameters",
                names.len()
            )));
        }
        for b in &blocks {
            match *b {
                Transform::Interval { lo, hi } if !(lo < hi) => {
                    return Err(invalid(format!("empty interval ({lo}, {hi})")))
                }
                Transform::Simplex { cap, .. } if !(cap > 0.0) => {
                    return Err(invalid(format!("simplex cap {cap} must be positive")))
                }
                _ => {}
            }
        }
        Ok(Self { names, blocks })
    }

    /// All parameters unconstrained.
    pub fn identity(dim: usize) -> Self {
        Self {
            names: (0..dim).map(|i| format!("x{i}")).collect(),
            blocks: vec![Transform::Identity; dim],
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn to_natural(&self, free: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(free.len());
        let mut i = 0;
        for b in &self.blocks {
            let l = b.len();
            b.forward(&free[i..i + l], &mut out);
            i += l;
        }
        out
    }

    pub fn to_free(&self, natural: &[f64]) -> Result<Vec<f64>> {
        if natural.len() != self.dim() {
            return Err(invalid(format!(
                "expected {} parameters, got {}",
                self.dim(),
                natural.len()
            )));
        }
        let mut out = Vec::with_capacity(natural.len());
        let mut i = 0;
        for b in &self.blocks {
            let l = b.len();
            b.inverse(&natural[i..i + l], &mut out)?;
            i += l;
        }
        Ok(out)
    }

    /// `∂ natural / ∂ free` by central differences.
    pub fn jacobian(&self, free: &[f64]) -> DMatrix<f64> {
        let k = free.len();
        let mut jac = DMatrix::zeros(k, k);
        let mut x = free.to_vec();
        for j in 0..k {
            let h = 1e-6 * free[j].abs().max(1.0);
            x[j] = free[j] + h;
            let up = self.to_natural(&x);
            x[j] = free[j] - h;
            let dn = self.to_natural(&x);
            x[j] = free[j];
            for i in 0..k {
                jac[(i, j)] = (up[i] - dn[i]) / (2.0 * h);
            }
        }
        jac
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimResult {
    /// Minimizer in natural parameter space.
    pub minimizer: Vec<f64>,
    /// Minimizer in the free (transformed) space.
    pub free_minimizer: Vec<f64>,
    pub objective_value: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Gradient norm in free space at the minimizer.
    pub gradient_norm: f64,
}

pub const MAX_ITERATIONS: usize = 10_000;
pub const DEFAULT_TOL: f64 = 1e-8;

/// Minimizes `objective` (a function of natural parameters) starting from
/// the feasible point `init`.
pub fn minimize<F>(objective: F, init: &[f64], param: &Parameterization, tol: f64) -> Result<OptimResult>
where
    F: Fn(&[f64]) -> f64,
{
    if !(tol > 0.0) {
        return Err(invalid(format!("tolerance must be positive, got {tol}")));
    }
    let free0 = param.to_free(init)?;
    let f = |u: &[f64]| {
        let v = objective(&param.to_natural(u));
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let f0 = f(&free0);
    if !f0.is_finite() {
        return Err(Error::NonFinite(format!("objective at initial point {init:?} is {f0}")));
    }

    let nm_budget = (400 * free0.len()).min(MAX_ITERATIONS / 2);
    let (mut x, mut fx, nm_iters) = nelder_mead(&f, &free0, f0, nm_budget, tol.sqrt().min(1e-5));
    let (bx, bfx, bfgs_iters, grad_norm, rel_change) = bfgs(&f, &x, fx, MAX_ITERATIONS - nm_iters, tol);
    if bfx <= fx {
        x = bx;
        fx = bfx;
    }
    let converged = fx.is_finite() && rel_change < tol && grad_norm < 100.0 * tol;
    Ok(OptimResult {
        minimizer: param.to_natural(&x),
        free_minimizer: x,
        objective_value: fx,
        converged,
        iterations: nm_iters + bfgs_iters,
        gradient_norm: grad_norm,
    })
}

fn nelder_mead<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], f0: f64, max_iter: usize, ftol: f64) -> (Vec<f64>, f64, usize) {
    let k = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(k + 1);
    simplex.push((x0.to_vec(), f0));
    for i in 0..k {
        let mut x = x0.to_vec();
        x[i] += 0.1 * x0[i].abs().max(1.0);
        let fx = f(&x);
        simplex.push((x, fx));
    }
    let centroid = |s: &[(Vec<f64>, f64)]| {
        let mut c = vec![0.0; k];
        for (x, _) in &s[..k] {
            for (ci, xi) in c.iter_mut().zip(x) {
                *ci += xi / k as f64;
            }
        }
        c
    };
    let along =
        |c: &[f64], w: &[f64], t: f64| -> Vec<f64> { c.iter().zip(w).map(|(ci, wi)| ci + t * (wi - ci)).collect() };
    let mut iters = 0;
    while iters < max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[k].1;
        if worst.is_finite() && (worst - best).abs() <= ftol * (best.abs() + ftol) {
            break;
        }
        iters += 1;
        let c = centroid(&simplex);
        let xr = along(&c, &simplex[k].0, -1.0);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = along(&c, &simplex[k].0, -2.0);
            let fe = f(&xe);
            simplex[k] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[k - 1].1 {
            simplex[k] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[k].1 {
                let xc = along(&c, &xr, 0.5);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = along(&c, &simplex[k].0, 0.5);
                let fc = f(&xc);
                (xc, fc)
            };
            if fc < simplex[k].1.min(fr) {
                simplex[k] = (xc, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    v.0 = along(&x_best, &v.0, 0.5);
                    v.1 = f(&v.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, fx) = simplex.swap_remove(0);
    (x, fx, iters)
}

fn free_gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64]) -> DVector<f64> {
    let mut g = DVector::zeros(x.len());
    let mut xv = x.to_vec();
    for i in 0..x.len() {
        let h = 1e-6 * x[i].abs().max(1.0);
        xv[i] = x[i] + h;
        let up = f(&xv);
        xv[i] = x[i] - h;
        let dn = f(&xv);
        xv[i] = x[i];
        g[i] = if up.is_finite() && dn.is_finite() {
            (up - dn) / (2.0 * h)
        } else {
            // one-sided when the point sits next to an infeasible region
            let f0 = f(x);
            if up.is_finite() {
                (up - f0) / h
            } else if dn.is_finite() {
                (f0 - dn) / h
            } else {
                0.0
            }
        };
    }
    g
}

/// Returns (x, f(x), iterations, gradient norm, last relative change).
fn bfgs<F: Fn(&[f64]) -> f64>(
    f: &F,
    x0: &[f64],
    f0: f64,
    max_iter: usize,
    tol: f64,
) -> (Vec<f64>, f64, usize, f64, f64) {
    let k = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut fx = f0;
    let mut g = free_gradient(f, x.as_slice());
    let mut hinv = DMatrix::<f64>::identity(k, k);
    let mut rel_change = f64::INFINITY;
    let mut iters = 0;
    let mut restarted = false;
    while iters < max_iter {
        let gnorm = g.norm();
        if gnorm < 100.0 * tol && rel_change < tol {
            break;
        }
        iters += 1;
        let mut dir = -(&hinv * &g);
        if dir.dot(&g) >= 0.0 {
            hinv = DMatrix::identity(k, k);
            dir = -g.clone();
        }
        let slope = dir.dot(&g);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let xn = &x + step * &dir;
            let fxn = f(xn.as_slice());
            if fxn.is_finite() && fxn <= fx + 1e-4 * step * slope {
                accepted = Some((xn, fxn));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fxn)) = accepted else {
            if restarted || hinv == DMatrix::identity(k, k) {
                break;
            }
            hinv = DMatrix::identity(k, k);
            restarted = true;
            continue;
        };
        restarted = false;
        let gn = free_gradient(f, xn.as_slice());
        let s = &xn - &x;
        let y = &gn - &g;
        let sy = s.dot(&y);
        rel_change = (fx - fxn).abs() / fx.abs().max(1.0);
        if sy > 1e-12 * s.norm() * y.norm() {
            if iters == 1 {
                // rescale the initial inverse Hessian guess
                let scale = sy / y.norm_squared();
                hinv *= scale;
            }
            let rho = 1.0 / sy;
            let hy = &hinv * &y;
            let yhy = y.dot(&hy);
            hinv +=
                ((1.0 + rho * yhy) * rho) * (&s * s.transpose()) - rho * (&hy * s.transpose() + &s * hy.transpose());
        }
        x = xn;
        fx = fxn;
        g = gn;
        if s.norm() < 1e-14 * x.norm().max(1.0) {
            rel_change = 0.0;
            break;
        }
    }
    let gnorm = g.norm();
    (x.as_slice().to_vec(), fx, iters, gnorm, rel_change)
}

/// Central-difference gradient with step `h·max(1, |x_i|)`.
pub fn numerical_gradient<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(invalid("step must be positive"));
    }
    let mut xv = x.to_vec();
    let mut g = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let hi = h * x[i].abs().max(1.0);
        xv[i] = x[i] + hi;
        let up = f(&xv);
        xv[i] = x[i] - hi;
        let dn = f(&xv);
        xv[i] = x[i];
        if !(up.is_finite() && dn.is_finite()) {
            return Err(Error::NonFinite(format!("gradient evaluation near coordinate {i}")));
        }
        g.push((up - dn) / (2.0 * hi));
    }
    Ok(g)
}

pub const DEFAULT_GRADIENT_STEP: f64 = 1e-6;
pub const DEFAULT_HESSIAN_STEP: f64 = 1e-4;

/// Central-difference Hessian with step `h·max(1, |x_i|)`, symmetrized.
pub fn numerical_hessian<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Result<DMatrix<f64>> {
    if !(h > 0.0) {
        return Err(invalid("step must be positive"));
    }
    let k = x.len();
    let steps: Vec<f64> = x.iter().map(|v| h * v.abs().max(1.0)).collect();
    let mut xv = x.to_vec();
    let eval = |xv: &mut Vec<f64>, di: (usize, f64), dj: (usize, f64)| -> Result<f64> {
        xv[di.0] += di.1;
        xv[dj.0] += dj.1;
        let v = f(xv);
        xv[di.0] -= di.1;
        xv[dj.0] -= dj.1;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite("Hessian evaluation".into()))
        }
    };
    let f0 = f(x);
    if !f0.is_finite() {
        return Err(Error::NonFinite("Hessian centre".into()));
    }
    let mut hm = DMatrix::zeros(k, k);
    for i in 0..k {
        let hi = steps[i];
        let up = eval(&mut xv, (i, hi), (i, 0.0))?;
        let dn = eval(&mut xv, (i, -hi), (i, 0.0))?;
        hm[(i, i)] = (up - 2.0 * f0 + dn) / (hi * hi);
        for j in 0..i {
            let hj = steps[j];
            let pp = eval(&mut xv, (i, hi), (j, hj))?;
            let pm = eval(&mut xv, (i, hi), (j, -hj))?;
            let mp = eval(&mut xv, (i, -hi), (j, hj))?;
            let mm = eval(&mut xv, (i, -hi), (j, -hj))?;
            let v = (pp - pm - mp + mm) / (4.0 * hi * hj);
            hm[(i, j)] = v;
            hm[(j, i)] = v;
        }
    }
    Ok((&hm + hm.transpose()) * 0.5)
}

/// Covariance of natural parameters from the inverse Hessian of a negative
/// log-likelihood in free space, mapped with the delta method.
///
/// Returns `None` when the Hessian is not positive definite.
pub fn natural_covariance<F>(neg_loglik: F, param: &Parameterization, free_minimizer: &[f64]) -> Option<DMatrix<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    let g = |u: &[f64]| neg_loglik(&param.to_natural(u));
    let h = numerical_hessian(g, free_minimizer, DEFAULT_HESSIAN_STEP).ok()?;
    let chol = h.cholesky()?;
    let cov_free = chol.inverse();
    let jac = param.jacobian(free_minimizer);
    Some(&jac * cov_free * jac.transpose())
}

/// Square roots of the covariance diagonal; NaN where unavailable.
pub fn standard_errors(cov: Option<&DMatrix<f64>>, dim: usize) -> Vec<f64> {
    match cov {
        Some(c) => (0..dim)
            .map(|i| {
                let v = c[(i, i)];
                if v >= 0.0 {
                    v.sqrt()
                } else {
                    f64::NAN
                }
            })
            .collect(),
        None => vec![f64::NAN; dim],
    }
}

/// Conditions noted on a fitted model. A flagged fit is still returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitFlag {
    /// The optimizer stopped without meeting its convergence test.
    NotConverged,
    /// A polynomial root lies within 1e-4 of the unit circle.
    UnitRootBoundary,
    /// Variance persistence within 1e-4 of one.
    IntegratedVarianceBoundary,
    /// All shock coefficients are near zero, so the lagged-variance
    /// coefficients are not identified.
    BetaUnidentified,
    /// Correlation dynamics at the `a + b → 1` boundary.
    CorrelationBoundary,
    /// Standardized residuals are perfectly collinear.
    SingularCorrelation,
    /// The Hessian was not positive definite; standard errors are NaN.
    StandardErrorsUnavailable,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quadratic_minimum() {
        let p = Parameterization::identity(1);
        let r = minimize(|x| (x[0] - 3.0).powi(2), &[0.0], &p, 1e-10).unwrap();
        assert!((r.minimizer[0] - 3.0).abs() < 1e-6);
        assert!(r.converged);
    }

    #[test]
    fn rosenbrock() {
        let p = Parameterization::identity(2);
        let f = |x: &[f64]| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
        let r = minimize(f, &[-1.2, 1.0], &p, 1e-10).unwrap();
        assert!((r.minimizer[0] - 1.0).abs() < 1e-4, "{:?}", r);
        assert!((r.minimizer[1] - 1.0).abs() < 1e-4, "{:?}", r);
    }

    #[test]
    fn positivity_pins_boundary() {
        let p = Parameterization::new(vec!["x".into()], vec![Transform::Lower { lo: 0.0 }]).unwrap();
        let r = minimize(|x| (x[0] + 1.0).powi(2), &[1.0], &p, 1e-8).unwrap();
        assert!(r.minimizer[0] > 0.0);
        assert!(r.minimizer[0] < 1e-3, "{:?}", r);
        // gradient in free space vanishes only asymptotically
        if r.converged {
            assert!(r.gradient_norm < 1e-6);
        }
    }

    #[test]
    fn minimize_errors() {
        let p = Parameterization::identity(1);
        assert!(minimize(|_| f64::NAN, &[0.0], &p, 1e-8).is_err());
        assert!(minimize(|x| x[0] * x[0], &[0.0], &p, 0.0).is_err());
        let pos = Parameterization::new(vec!["x".into()], vec![Transform::Lower { lo: 0.0 }]).unwrap();
        assert!(minimize(|x| x[0], &[-1.0], &pos, 1e-8).is_err());
    }

    #[test]
    fn minimize_is_deterministic() {
        let p = Parameterization::identity(2);
        let f = |x: &[f64]| (x[0] - 1.0).powi(4) + (x[0] * x[1] - 2.0).powi(2);
        let a = minimize(f, &[0.3, 0.3], &p, 1e-9).unwrap();
        let b = minimize(f, &[0.3, 0.3], &p, 1e-9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gradient_cases() {
        let g = numerical_gradient(|x| x.iter().map(|v| v * v).sum(), &[1.0, 2.0], 1e-6).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-6 && (g[1] - 4.0).abs() < 1e-6);
        let g = numerical_gradient(|x| x[0].exp(), &[0.0], 1e-6).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-8);
        assert!(numerical_gradient(|x| 1.0 / x[0] - f64::INFINITY, &[1.0], 1e-6).is_err());
    }

    #[test]
    fn gradient_matches_fourth_order_oracle() {
        let f = |x: &[f64]| (x[0] * x[1]).sin() + x[2].exp() * x[0] - (1.0 + x[1] * x[1]).ln();
        let x = [0.7, -1.3, 0.4];
        let g = numerical_gradient(f, &x, 1e-6).unwrap();
        for i in 0..3 {
            let h = 1e-3;
            let at = |d: f64| {
                let mut y = x;
                y[i] += d;
                f(&y)
            };
            let oracle = (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h);
            assert!(
                (g[i] - oracle).abs() <= 1e-5 * oracle.abs().max(1.0),
                "{i}: {} vs {oracle}",
                g[i]
            );
        }
    }

    #[test]
    fn hessian_cases() {
        let a = [[2.0, 0.5], [0.5, 1.0]];
        let f = |x: &[f64]| {
            (0..2)
                .map(|i| (0..2).map(|j| x[i] * a[i][j] * x[j]).sum::<f64>())
                .sum::<f64>()
        };
        let h = numerical_hessian(f, &[0.3, -0.8], DEFAULT_HESSIAN_STEP).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((h[(i, j)] - 2.0 * a[i][j]).abs() < 1e-4);
            }
        }
        let h = numerical_hessian(|x| x[0] * x[0] * x[1], &[1.0, 1.0], DEFAULT_HESSIAN_STEP).unwrap();
        let expect = [[2.0, 2.0], [2.0, 0.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((h[(i, j)] - expect[i][j]).abs() < 1e-4);
            }
        }
        let conv = |x: &[f64]| (x[0] - 1.0).powi(2) + (x[0] - x[1]).powi(4) + x[1].cosh();
        let p = Parameterization::identity(2);
        let r = minimize(conv, &[0.0, 0.0], &p, 1e-10).unwrap();
        let h = numerical_hessian(conv, &r.minimizer, DEFAULT_HESSIAN_STEP).unwrap();
        let min_eig = h.symmetric_eigen().eigenvalues.min();
        assert!(min_eig >= -1e-6);
    }

    #[test]
    fn delta_method_standard_errors_match() {
        // negative log-likelihood of N(2, 0.3²) location: SE = 0.3
        let nll = |x: &[f64]| (x[0] - 2.0).powi(2) / (2.0 * 0.09);
        let ident = Parameterization::identity(1);
        let pos = Parameterization::new(vec!["m".into()], vec![Transform::Lower { lo: 0.0 }]).unwrap();
        let bounded = Parameterization::new(vec!["m".into()], vec![Transform::Interval { lo: 1.0, hi: 5.0 }]).unwrap();
        for p in [&ident, &pos, &bounded] {
            let free = p.to_free(&[2.0]).unwrap();
            let cov = natural_covariance(nll, p, &free);
            let se = standard_errors(cov.as_ref(), 1);
            assert!((se[0] - 0.3).abs() < 1e-5, "{se:?}");
        }
    }

    #[test]
    fn stationary_transform_examples() {
        let p = Parameterization::new(vec!["a1".into(), "a2".into()], vec![Transform::Stationary { len: 2 }]).unwrap();
        assert!(p.to_free(&[0.5, 0.6]).is_err());
        let u = p.to_free(&[-0.6989, -0.7508]).unwrap();
        let back = p.to_natural(&u);
        assert!((back[0] + 0.6989).abs() < 1e-12 && (back[1] + 0.7508).abs() < 1e-12);
    }

    fn roundtrip(p: &Parameterization, x: &[f64]) -> std::result::Result<(), TestCaseError> {
        let u = p.to_free(x).unwrap();
        let y = p.to_natural(&u);
        for (a, b) in x.iter().zip(&y) {
            prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0), "{x:?} -> {y:?}");
        }
        Ok(())
    }

    proptest! {
        #[test]
        fn transforms_roundtrip(
            id in -1e3f64..1e3,
            pos in 1e-6f64..1e3,
            iv in 2.02f64..99.0,
            w in proptest::collection::vec(0.01f64..1.0, 3),
            r in proptest::collection::vec(-0.95f64..0.95, 3),
        ) {
            // simplex point strictly inside {x > 0, Σx < 0.999}
            let total: f64 = w.iter().sum::<f64>() + 0.2;
            let simplex: Vec<f64> = w.iter().map(|v| 0.999 * v / total).collect();
            let ar = pacf_to_ar(&r.iter().map(|v| v.atanh()).collect::<Vec<_>>());
            let ma: Vec<f64> = ar.iter().map(|v| -v).collect();
            let p = Parameterization::new(
                (0..12).map(|i| format!("p{i}")).collect(),
                vec![
                    Transform::Identity,
                    Transform::Lower { lo: 0.0 },
                    Transform::Interval { lo: 2.01, hi: 100.0 },
                    Transform::Simplex { len: 3, cap: 0.999 },
                    Transform::Stationary { len: 3 },
                    Transform::Invertible { len: 3 },
                ],
            ).unwrap();
            let mut x = vec![id, pos, iv];
            x.extend(simplex);
            x.extend(ar);
            x.extend(ma);
            roundtrip(&p, &x)?;
        }
    }
}
