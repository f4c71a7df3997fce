//! Predictor-pole filtering: Butterworth placement of the poles, the causal
//! filter `q^n / alpha(q)` and its separable two-dimensional extension to
//! the Gram matrix.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::GramMatrix;
use crate::model::AlphaPolynomial;

/// Gram matrix after filtering both axes with `q^n / alpha(q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredGram {
    pub entries: DMatrix<f64>,
    pub alpha: AlphaPolynomial,
}

/// Predictor polynomial whose roots are the matched-z images of an
/// `n_x`-th order analog Butterworth low-pass with cutoff `omega_c` rad/s.
///
/// Analog poles `s_m = omega_c * exp(j pi (2m + n_x - 1) / (2 n_x))`,
/// `m = 1..=n_x`, all in the open left half plane; `z_m = exp(s_m ts)`.
pub fn butterworth_alpha(omega_c: f64, ts: f64, n_x: usize) -> Result<AlphaPolynomial> {
    if n_x == 0 {
        return Err(Error::invalid("n_x", "model order must be >= 1"));
    }
    if !(ts.is_finite() && ts > 0.0) {
        return Err(Error::invalid(
            "Ts",
            format!("must be finite and > 0, got {ts}"),
        ));
    }
    let nyquist = PI / ts;
    if !(omega_c > 0.0 && omega_c < nyquist) {
        return Err(Error::CutoffOutOfRange { omega_c, nyquist });
    }
    let poles: Vec<Complex64> = (1..=n_x)
        .map(|m| {
            let angle = PI * (2 * m + n_x - 1) as f64 / (2 * n_x) as f64;
            (Complex64::from_polar(omega_c, angle) * ts).exp()
        })
        .collect();
    AlphaPolynomial::from_roots(&poles)
}

/// Causal filter `y[k] = x[k] - sum_m alpha_m y[k-m]` with zero initial
/// conditions.
pub fn iir_filter_1d(alpha: &AlphaPolynomial, x: &[f64]) -> Vec<f64> {
    let mut y = x.to_vec();
    iir_filter_in_place(alpha.coeffs(), &mut y);
    y
}

pub(crate) fn iir_filter_in_place(alpha: &[f64], x: &mut [f64]) {
    for k in 0..x.len() {
        let mut acc = x[k];
        for (m, &a) in alpha.iter().enumerate() {
            if let Some(prev) = k.checked_sub(m + 1) {
                acc -= a * x[prev];
            }
        }
        x[k] = acc;
    }
}

/// Anti-causal counterpart of [`iir_filter_1d`]: applies the transpose of
/// the lower-triangular filtering operator.
pub(crate) fn iir_filter_adjoint_in_place(alpha: &[f64], x: &mut [f64]) {
    let n = x.len();
    for k in (0..n).rev() {
        let mut acc = x[k];
        for (m, &a) in alpha.iter().enumerate() {
            let next = k + m + 1;
            if next < n {
                acc -= a * x[next];
            }
        }
        x[k] = acc;
    }
}

fn filter_columns(alpha: &[f64], m: &mut DMatrix<f64>) {
    let rows = m.nrows();
    if rows == 0 {
        return;
    }
    m.as_mut_slice()
        .par_chunks_mut(rows)
        .for_each(|col| iir_filter_in_place(alpha, col));
}

/// Filters the Gram matrix down every column, then along every row.
///
/// The result solves
/// `sum_{a,b = 0..=n} alpha_a alpha_b K[i-a, j-b] = G[i, j]` with
/// `alpha_0 = 1` and `K` zero outside the matrix.
pub fn filter_gram_2d(alpha: &AlphaPolynomial, g: &GramMatrix) -> FilteredGram {
    let mut k = g.entries.clone();
    if !alpha.is_origin() {
        filter_columns(alpha.coeffs(), &mut k);
        k.transpose_mut();
        filter_columns(alpha.coeffs(), &mut k);
        k.transpose_mut();
    }
    FilteredGram {
        entries: k,
        alpha: alpha.clone(),
    }
}
