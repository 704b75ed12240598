//! Small dense-matrix helpers shared by the regression-based tests and the
//! multivariate models.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub(crate) struct OlsFit {
    pub coef: DVector<f64>,
    pub se: DVector<f64>,
    pub r_squared: f64,
}

/// Least squares of `y` on the columns of `x` (include a constant column
/// explicitly). `r_squared` is centered.
pub(crate) fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit> {
    let (n, k) = x.shape();
    if n <= k {
        return Err(Error::InsufficientData { needed: k + 1, got: n });
    }
    // scale columns before the QR so the rank check is unit-free
    let norms: Vec<f64> = (0..k).map(|j| x.column(j).norm()).collect();
    if norms.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::Collinear);
    }
    let mut xs = x.clone();
    for (j, s) in norms.iter().enumerate() {
        xs.column_mut(j).scale_mut(1.0 / s);
    }
    let qr = xs.clone().qr();
    let r = qr.r();
    let max_diag = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if (0..k).any(|i| r[(i, i)].abs() <= 1e-10 * max_diag) {
        return Err(Error::Collinear);
    }
    let qty = qr.q().transpose() * y;
    let beta_s = r.solve_upper_triangular(&qty).ok_or(Error::Collinear)?;
    let resid = y - &xs * &beta_s;
    let rss = resid.norm_squared();
    let sigma2 = rss / (n - k) as f64;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or(Error::Collinear)?;
    let cov_s = &r_inv * r_inv.transpose();
    let coef = DVector::from_iterator(k, (0..k).map(|j| beta_s[j] / norms[j]));
    let se = DVector::from_iterator(k, (0..k).map(|j| (sigma2 * cov_s[(j, j)]).sqrt() / norms[j]));
    let mean = y.mean();
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let r_squared = if tss > 0.0 { 1.0 - rss / tss } else { 0.0 };
    Ok(OlsFit { coef, se, r_squared })
}

/// Symmetric eigen square root and inverse square root of an SPD matrix.
pub(crate) fn sym_sqrt_and_inv(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let eig = m.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::Numerical("matrix is not positive definite".into()));
    }
    let v = &eig.eigenvectors;
    let sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    Ok((v * sqrt * v.transpose(), v * inv_sqrt * v.transpose()))
}

pub(crate) fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}
