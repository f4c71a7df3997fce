//! Dual LS-SVM solve, coefficient reconstruction and free-run simulation.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::filter::{filter_gram_2d, iir_filter_adjoint_in_place, FilteredGram};
use crate::kernel::{gram_with_kernel, kernel_sequences, GramMatrix, Kernel, Rbf};
use crate::model::{companion_from_alpha, validate_dataset, AlphaPolynomial, Dataset, HyperParams};

/// Condition estimates above this are reported as [`Error::SingularSystem`].
pub const MAX_CONDITION: f64 = 1e14;

/// Simulated outputs beyond this magnitude abort with [`Error::DivergedSimulation`].
pub const DIVERGENCE_LIMIT: f64 = 1e9;

/// `L(pbar)` and `B(pbar)` of the identified model.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientPair {
    pub l: Vec<f64>,
    pub b: Vec<f64>,
    pub pbar: Vec<f64>,
}

impl CoefficientPair {
    /// Rewrites the state-space coefficients as lag coefficients of the
    /// equivalent difference equation
    /// `y[k] = sum_m a_m(p[k-m]) y[k-m] + b_m(p[k-m]) u[k-m]`.
    ///
    /// Returns `(a, b)` indexed by lag `m = 1..=n_x`.
    pub fn lag_coefficients(&self, alpha: &AlphaPolynomial) -> (Vec<f64>, Vec<f64>) {
        let n = self.l.len();
        let a = (1..=n)
            .map(|m| self.l[n - m] - alpha.coeffs()[m - 1])
            .collect();
        let b = (1..=n).map(|m| self.b[n - m]).collect();
        (a, b)
    }
}

/// Identified model: the estimation record, dual variables and the design
/// choices needed to evaluate `L` and `B` anywhere in the scheduling space.
#[derive(Debug, Clone)]
pub struct TrainedModel<K = Rbf> {
    dataset: Dataset,
    lambda: Vec<f64>,
    alpha: AlphaPolynomial,
    hyper: HyperParams,
    kernel: K,
    /// `lambda` passed through the adjoint of the predictor filter.
    weights: Vec<f64>,
}

impl TrainedModel<Rbf> {
    /// Reassembles a model from stored parts (used when loading model files).
    pub fn from_parts(
        dataset: Dataset,
        lambda: Vec<f64>,
        alpha: AlphaPolynomial,
        hyper: HyperParams,
    ) -> Result<Self> {
        hyper.validate()?;
        let kernel = Rbf { sigma: hyper.sigma };
        Self::assemble(dataset, lambda, alpha, hyper, kernel)
    }
}

impl<K: Kernel> TrainedModel<K> {
    fn assemble(
        dataset: Dataset,
        lambda: Vec<f64>,
        alpha: AlphaPolynomial,
        hyper: HyperParams,
        kernel: K,
    ) -> Result<Self> {
        if alpha.n_x() != hyper.n_x {
            return Err(Error::LengthMismatch {
                field: "alpha",
                expected: hyper.n_x,
                found: alpha.n_x(),
            });
        }
        validate_dataset(&dataset, hyper.n_x)?;
        let expected = dataset.len() - hyper.n_x;
        if lambda.len() != expected {
            return Err(Error::LengthMismatch {
                field: "lambda",
                expected,
                found: lambda.len(),
            });
        }
        if let Some(index) = lambda.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                field: "lambda",
                index,
            });
        }
        let mut weights = lambda.clone();
        iir_filter_adjoint_in_place(alpha.coeffs(), &mut weights);
        Ok(TrainedModel {
            dataset,
            lambda,
            alpha,
            hyper,
            kernel,
            weights,
        })
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn alpha(&self) -> &AlphaPolynomial {
        &self.alpha
    }

    pub fn hyper(&self) -> &HyperParams {
        &self.hyper
    }

    pub fn n_x(&self) -> usize {
        self.hyper.n_x
    }

    /// One-step predictions of `[y[n_x], ..., y[N-1]]` on the estimation
    /// record, `Y - lambda / gamma`.
    pub fn in_sample_predictions(&self) -> Vec<f64> {
        let y = &self.dataset.y()[self.n_x()..];
        y.iter()
            .zip(&self.lambda)
            .map(|(y, l)| y - l / self.hyper.gamma)
            .collect()
    }

    /// Evaluates `L(pbar)` and `B(pbar)`.
    ///
    /// Row `r` of the Hankel matrices of kernel products is weighted by the
    /// dual variables after they have been passed backwards through the
    /// predictor filter, which is the exact dual of the zero-initial-state
    /// Gram filtering.
    pub fn reconstruct(&self, pbar: &[f64]) -> CoefficientPair {
        let (sy, su) = kernel_sequences(pbar, &self.dataset, &self.kernel);
        let n_x = self.n_x();
        let cols = self.weights.len();
        let hankel_row = |s: &[f64], r: usize| -> f64 {
            self.weights
                .iter()
                .zip(&s[r..r + cols])
                .map(|(w, v)| w * v)
                .sum()
        };
        CoefficientPair {
            l: (0..n_x).map(|r| hankel_row(&sy, r)).collect(),
            b: (0..n_x).map(|r| hankel_row(&su, r)).collect(),
            pbar: pbar.to_vec(),
        }
    }

    /// Free-run simulation from a zero initial state.
    ///
    /// `p` is the flat row-major scheduling record with the same dimension
    /// as the estimation data.
    pub fn simulate(&self, u: &[f64], p: &[f64]) -> Result<Vec<f64>> {
        let n_p = self.dataset.n_p();
        if p.len() != u.len() * n_p {
            return Err(Error::LengthMismatch {
                field: "p",
                expected: u.len() * n_p,
                found: p.len() / n_p.max(1),
            });
        }
        let (a, c) = companion_from_alpha(&self.alpha);
        let n_x = self.n_x();
        let mut x = DVector::<f64>::zeros(n_x);
        let mut cache: HashMap<Vec<u64>, CoefficientPair> = HashMap::new();
        let mut out = Vec::with_capacity(u.len());
        for (k, (&uk, pk)) in u.iter().zip(p.chunks_exact(n_p)).enumerate() {
            let yk = (&c * &x)[0];
            if !yk.is_finite() || yk.abs() > DIVERGENCE_LIMIT {
                return Err(Error::DivergedSimulation { step: k });
            }
            out.push(yk);
            let key: Vec<u64> = pk.iter().map(|v| v.to_bits()).collect();
            let coeffs = cache.entry(key).or_insert_with(|| self.reconstruct(pk));
            let mut next = &a * &x;
            for i in 0..n_x {
                next[i] += coeffs.l[i] * yk + coeffs.b[i] * uk;
            }
            x = next;
        }
        Ok(out)
    }

    /// Simulates on the inputs and scheduling of `d`.
    pub fn simulate_dataset(&self, d: &Dataset) -> Result<Vec<f64>> {
        self.simulate(d.u(), d.p_flat())
    }
}

/// Fits with the RBF kernel of width `hyper.sigma`.
pub fn fit(d: &Dataset, hyper: &HyperParams, alpha: &AlphaPolynomial) -> Result<TrainedModel> {
    hyper.validate()?;
    fit_with_kernel(d, hyper, alpha, Rbf { sigma: hyper.sigma })
}

/// Fits with an arbitrary scheduling kernel.
pub fn fit_with_kernel<K: Kernel>(
    d: &Dataset,
    hyper: &HyperParams,
    alpha: &AlphaPolynomial,
    kernel: K,
) -> Result<TrainedModel<K>> {
    check_orders(hyper, alpha)?;
    let g = gram_with_kernel(d, hyper.n_x, &kernel)?;
    fit_with_gram(d, hyper, alpha, kernel, &g)
}

/// Fits from a precomputed unfiltered Gram matrix (shared across candidate
/// predictor polynomials during tuning).
pub fn fit_with_gram<K: Kernel>(
    d: &Dataset,
    hyper: &HyperParams,
    alpha: &AlphaPolynomial,
    kernel: K,
    g: &GramMatrix,
) -> Result<TrainedModel<K>> {
    check_orders(hyper, alpha)?;
    validate_dataset(d, hyper.n_x)?;
    if g.n_x != hyper.n_x || g.n != d.len() {
        return Err(Error::LengthMismatch {
            field: "gram",
            expected: d.len() - hyper.n_x,
            found: g.dim(),
        });
    }
    let k = filter_gram_2d(alpha, g);
    let target = &d.y()[hyper.n_x..];
    let lambda = solve_dual(&k, hyper.gamma, target)?;
    TrainedModel::assemble(d.clone(), lambda, alpha.clone(), *hyper, kernel)
}

fn check_orders(hyper: &HyperParams, alpha: &AlphaPolynomial) -> Result<()> {
    hyper.validate()?;
    if alpha.n_x() != hyper.n_x {
        return Err(Error::LengthMismatch {
            field: "alpha",
            expected: hyper.n_x,
            found: alpha.n_x(),
        });
    }
    Ok(())
}

/// Solves `(I / gamma + K) lambda = y`.
pub fn solve_dual(k: &FilteredGram, gamma: f64, y: &[f64]) -> Result<Vec<f64>> {
    let n = k.entries.nrows();
    if y.len() != n {
        return Err(Error::LengthMismatch {
            field: "y",
            expected: n,
            found: y.len(),
        });
    }
    let mut m = k.entries.clone();
    for i in 0..n {
        m[(i, i)] += 1.0 / gamma;
    }
    let norm1 = matrix_norm1(&m);
    let rhs = DVector::from_column_slice(y);

    let (lambda, inv_norm1) = match m.clone().cholesky() {
        Some(chol) => {
            let est = inverse_norm1_estimate(n, |v| chol.solve(v));
            (chol.solve(&rhs), est)
        }
        None => {
            let lu = m.lu();
            let solve = |v: &DVector<f64>| {
                lu.solve(v)
                    .unwrap_or_else(|| DVector::from_element(n, f64::INFINITY))
            };
            let est = inverse_norm1_estimate(n, solve);
            (solve(&rhs), est)
        }
    };
    let condition = norm1 * inv_norm1;
    if !condition.is_finite() || condition > MAX_CONDITION || lambda.iter().any(|v| !v.is_finite())
    {
        return Err(Error::SingularSystem { condition });
    }
    Ok(lambda.as_slice().to_vec())
}

fn matrix_norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Hager's estimate of `||M^-1||_1` for symmetric `M`, given a solver.
fn inverse_norm1_estimate(n: usize, solve: impl Fn(&DVector<f64>) -> DVector<f64>) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut est = 0.0;
    for _ in 0..5 {
        let y = solve(&x);
        est = y.lp_norm(1);
        if !est.is_finite() {
            return f64::INFINITY;
        }
        let xi = y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
        let z = solve(&xi);
        let (j, zmax) = z.iamax_full();
        let zmax = z[(j, zmax)].abs();
        if zmax <= z.dot(&x) {
            break;
        }
        x = DVector::zeros(n);
        x[j] = 1.0;
    }
    est
}

/// `||Y - Yhat|| / ||Y - mean(Y)||`.
pub fn normalized_error(y_true: &[f64], y_sim: &[f64]) -> Result<f64> {
    if y_true.len() != y_sim.len() {
        return Err(Error::LengthMismatch {
            field: "y_sim",
            expected: y_true.len(),
            found: y_sim.len(),
        });
    }
    if y_true.len() < 2 {
        return Err(Error::invalid("y_true", "need at least two samples"));
    }
    let mean = y_true.iter().sum::<f64>() / y_true.len() as f64;
    let spread: f64 = y_true
        .iter()
        .map(|v| (v - mean).powi(2))
        .sum::<f64>()
        .sqrt();
    if spread == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let err: f64 = y_true
        .iter()
        .zip(y_sim)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(err / spread)
}

/// Best fit rate in percent, clipped below at zero.
pub fn bfr(y_true: &[f64], y_sim: &[f64]) -> Result<f64> {
    Ok(100.0 * (1.0 - normalized_error(y_true, y_sim)?).max(0.0))
}
