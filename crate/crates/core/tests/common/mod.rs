//! Explicit primal-form oracles shared by integration tests.
//!
//! Everything here is built from dense matrices and textbook formulas, not
//! from the library's filtering or reconstruction code.

#![allow(dead_code)]

use lpv_lssvm::Dataset;
use nalgebra::{DMatrix, DVector};

/// Polynomial feature map `F(p)` with `F(a) . F(b) = (1 + a b)^degree` for
/// scalar scheduling.
pub fn poly_features(p: f64, degree: u32) -> Vec<f64> {
    match degree {
        1 => vec![1.0, p],
        2 => vec![1.0, 2f64.sqrt() * p, p * p],
        _ => panic!("degree {degree} not covered"),
    }
}

pub fn poly_kernel(degree: u32) -> impl Fn(&[f64], &[f64]) -> f64 + Sync + Copy {
    move |a: &[f64], b: &[f64]| (1.0 + a[0] * b[0]).powi(degree as i32)
}

/// Filter matrix `H = T^{-1}` where `T` is the banded lower-triangular
/// Toeplitz matrix of `1 + alpha_1 q^-1 + ... + alpha_nx q^-nx`.
pub fn filter_matrix(alpha: &[f64], n: usize) -> DMatrix<f64> {
    let mut t = DMatrix::<f64>::identity(n, n);
    for (m, a) in alpha.iter().enumerate() {
        for i in (m + 1)..n {
            t[(i, i - m - 1)] = *a;
        }
    }
    t.try_inverse()
        .expect("unit lower-triangular is invertible")
}

/// Stacked regressors: row `i` holds `F(p_{i+m}) y_{i+m}` and
/// `F(p_{i+m}) u_{i+m}` for lags `m = 0..n_x`.
pub fn regressors(d: &Dataset, n_x: usize, degree: u32) -> DMatrix<f64> {
    let f = poly_features(0.0, degree).len();
    let rows = d.len() - n_x;
    let mut z = DMatrix::<f64>::zeros(rows, 2 * n_x * f);
    for i in 0..rows {
        for m in 0..n_x {
            let k = i + m;
            let feat = poly_features(d.p(k)[0], degree);
            for (c, v) in feat.iter().enumerate() {
                z[(i, 2 * m * f + c)] = v * d.y()[k];
                z[(i, (2 * m + 1) * f + c)] = v * d.u()[k];
            }
        }
    }
    z
}

pub struct PrimalSolution {
    pub theta: DVector<f64>,
    pub predictions: Vec<f64>,
}

/// Ridge regression `min |theta|^2 / 2 + gamma / 2 |Y - H Z theta|^2`.
pub fn primal_ridge(
    d: &Dataset,
    n_x: usize,
    degree: u32,
    alpha: &[f64],
    gamma: f64,
) -> PrimalSolution {
    let z = regressors(d, n_x, degree);
    let phi = filter_matrix(alpha, z.nrows()) * z;
    let y = DVector::from_column_slice(&d.y()[n_x..]);
    let lhs = phi.transpose() * &phi + DMatrix::identity(phi.ncols(), phi.ncols()) / gamma;
    let theta = lhs
        .lu()
        .solve(&(phi.transpose() * y))
        .expect("ridge system is regular");
    let predictions = (phi * &theta).iter().copied().collect();
    PrimalSolution { theta, predictions }
}

/// Free-run simulation of the primal model from a zero state, with the
/// companion matrix built straight from its definition.
pub fn primal_simulate(
    theta: &DVector<f64>,
    alpha: &[f64],
    degree: u32,
    u: &[f64],
    p: &[f64],
) -> Vec<f64> {
    let n_x = alpha.len();
    let f = poly_features(0.0, degree).len();
    let mut a = DMatrix::<f64>::zeros(n_x, n_x);
    for i in 1..n_x {
        a[(i, i - 1)] = 1.0;
    }
    for i in 0..n_x {
        a[(i, n_x - 1)] = -alpha[n_x - 1 - i];
    }
    let mut x = DVector::<f64>::zeros(n_x);
    let mut out = Vec::with_capacity(u.len());
    for (&uk, &pk) in u.iter().zip(p) {
        let yk = x[n_x - 1];
        out.push(yk);
        let feat = DVector::from_vec(poly_features(pk, degree));
        let mut next = &a * &x;
        for r in 0..n_x {
            let l = feat.dot(&theta.rows(2 * r * f, f));
            let b = feat.dot(&theta.rows((2 * r + 1) * f, f));
            next[r] += l * yk + b * uk;
        }
        x = next;
    }
    out
}

pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / norm.max(f64::MIN_POSITIVE)
}
