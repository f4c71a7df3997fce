//! Scheduling kernels and the unfiltered Gram matrix of the stacked
//! regressors.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::Result;
use crate::model::{validate_dataset, Dataset, HyperParams};

/// Positive definite kernel on the scheduling space.
pub trait Kernel: Sync {
    fn eval(&self, a: &[f64], b: &[f64]) -> f64;
}

impl<F> Kernel for F
where
    F: Fn(&[f64], &[f64]) -> f64 + Sync,
{
    fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        self(a, b)
    }
}

/// Gaussian radial basis function of width `sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rbf {
    pub sigma: f64,
}

impl Kernel for Rbf {
    fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        rbf(a, b, self.sigma)
    }
}

/// `exp(-|a - b|^2 / sigma^2)`.
pub fn rbf(a: &[f64], b: &[f64], sigma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-d2 / (sigma * sigma)).exp()
}

/// Symmetric `(N - n_x) x (N - n_x)` matrix of regressor inner products.
///
/// Row `i` (zero-based) corresponds to the regressor built from samples
/// `i ..= i + n_x - 1`, i.e. the one predicting sample `i + n_x`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub entries: DMatrix<f64>,
    pub n_x: usize,
    pub n: usize,
}

impl GramMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }
}

/// Gram matrix under the RBF kernel.
pub fn gram(d: &Dataset, hyper: &HyperParams) -> Result<GramMatrix> {
    hyper.validate()?;
    gram_with_kernel(d, hyper.n_x, &Rbf { sigma: hyper.sigma })
}

/// Entry `(i, j)` is `sum_{m < n_x} psi(p[i+m], p[j+m]) * (y[i+m] y[j+m] + u[i+m] u[j+m])`.
pub fn gram_with_kernel<K: Kernel + ?Sized>(
    d: &Dataset,
    n_x: usize,
    kernel: &K,
) -> Result<GramMatrix> {
    validate_dataset(d, n_x)?;
    let n = d.len();
    let dim = n - n_x;
    // Weighted sample products, used only over the leading N-1 samples.
    let w = n - 1;
    let (u, y) = (d.u(), d.y());
    let cols: Vec<Vec<f64>> = (0..w)
        .into_par_iter()
        .map(|b| {
            let pb = d.p(b);
            (0..w)
                .map(|a| kernel.eval(d.p(a), pb) * (y[a] * y[b] + u[a] * u[b]))
                .collect()
        })
        .collect();

    let mut entries = DMatrix::zeros(dim, dim);
    for (j, mut col) in entries.column_iter_mut().enumerate() {
        for (i, e) in col.iter_mut().enumerate() {
            *e = (0..n_x).map(|m| cols[j + m][i + m]).sum();
        }
    }
    Ok(GramMatrix { entries, n_x, n })
}

/// Unfiltered products `psi(pbar, p[k]) y[k]` and `psi(pbar, p[k]) u[k]`
/// for the first `N - 1` samples.
pub fn kernel_sequences<K: Kernel + ?Sized>(
    pbar: &[f64],
    d: &Dataset,
    kernel: &K,
) -> (Vec<f64>, Vec<f64>) {
    let m = d.len().saturating_sub(1);
    let mut sy = Vec::with_capacity(m);
    let mut su = Vec::with_capacity(m);
    for k in 0..m {
        let psi = kernel.eval(pbar, d.p(k));
        sy.push(psi * d.y()[k]);
        su.push(psi * d.u()[k]);
    }
    (sy, su)
}
