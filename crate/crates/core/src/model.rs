//! Domain types shared by every stage of the identification pipeline.
//!
//! The identified model has the form
//!
//! ```text
//! x[k+1] = (A + L(p[k]) C) x[k] + B(p[k]) u[k]
//! y[k]   = C x[k]
//! ```
//!
//! where `(C, A)` is a fixed observable companion pair chosen by the user
//! through the characteristic polynomial `alpha(q)` of `A`, and `L`, `B` are
//! nonparametric functions of the scheduling signal.

use std::ops::Range;

use nalgebra::{DMatrix, RowDVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Aligned input, output and scheduling records sampled every `ts` seconds.
///
/// Scheduling vectors are stored row-major in a flat buffer; every sample
/// has the same dimension `n_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    u: Vec<f64>,
    y: Vec<f64>,
    p: Vec<f64>,
    n_p: usize,
    ts: f64,
}

impl Dataset {
    /// Builds a dataset from per-sample scheduling vectors.
    pub fn new(u: Vec<f64>, y: Vec<f64>, p: Vec<Vec<f64>>, ts: f64) -> Result<Self> {
        let n_p = p.first().map_or(1, Vec::len);
        if n_p == 0 {
            return Err(Error::invalid("p", "scheduling vectors must be non-empty"));
        }
        let mut flat = Vec::with_capacity(p.len() * n_p);
        for row in &p {
            if row.len() != n_p {
                return Err(Error::LengthMismatch {
                    field: "p",
                    expected: n_p,
                    found: row.len(),
                });
            }
            flat.extend_from_slice(row);
        }
        Self::from_flat(u, y, flat, n_p, ts, p.len())
    }

    /// Builds a dataset with a scalar scheduling signal.
    pub fn scalar(u: Vec<f64>, y: Vec<f64>, p: Vec<f64>, ts: f64) -> Result<Self> {
        let n = p.len();
        Self::from_flat(u, y, p, 1, ts, n)
    }

    fn from_flat(
        u: Vec<f64>,
        y: Vec<f64>,
        p: Vec<f64>,
        n_p: usize,
        ts: f64,
        p_len: usize,
    ) -> Result<Self> {
        let d = Dataset { u, y, p, n_p, ts };
        d.check_consistency(p_len)?;
        Ok(d)
    }

    fn check_consistency(&self, p_len: usize) -> Result<()> {
        let n = self.u.len();
        if self.y.len() != n {
            return Err(Error::LengthMismatch {
                field: "y",
                expected: n,
                found: self.y.len(),
            });
        }
        if p_len != n {
            return Err(Error::LengthMismatch {
                field: "p",
                expected: n,
                found: p_len,
            });
        }
        if !(self.ts.is_finite() && self.ts > 0.0) {
            return Err(Error::invalid(
                "Ts",
                format!("must be finite and > 0, got {}", self.ts),
            ));
        }
        check_finite("u", &self.u)?;
        check_finite("y", &self.y)?;
        if let Some(i) = self.p.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                field: "p",
                index: i / self.n_p,
            });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Scheduling vector of sample `k` (zero-based).
    pub fn p(&self, k: usize) -> &[f64] {
        &self.p[k * self.n_p..(k + 1) * self.n_p]
    }

    /// Flat row-major scheduling buffer.
    pub fn p_flat(&self) -> &[f64] {
        &self.p
    }

    pub fn p_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.p.chunks_exact(self.n_p)
    }

    pub fn n_p(&self) -> usize {
        self.n_p
    }

    pub fn ts(&self) -> f64 {
        self.ts
    }

    /// Nyquist frequency in rad/s.
    pub fn nyquist(&self) -> f64 {
        std::f64::consts::PI / self.ts
    }

    /// Contiguous sub-record, keeping the sampling period.
    pub fn slice(&self, range: Range<usize>) -> Dataset {
        Dataset {
            u: self.u[range.clone()].to_vec(),
            y: self.y[range.clone()].to_vec(),
            p: self.p[range.start * self.n_p..range.end * self.n_p].to_vec(),
            n_p: self.n_p,
            ts: self.ts,
        }
    }

    /// Same inputs and scheduling with a replaced output record.
    pub fn with_output(&self, y: Vec<f64>) -> Result<Dataset> {
        let d = Dataset { y, ..self.clone() };
        d.check_consistency(self.len())?;
        Ok(d)
    }
}

fn check_finite(field: &'static str, xs: &[f64]) -> Result<()> {
    match xs.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { field, index }),
        None => Ok(()),
    }
}

/// Checks that `d` can be used to estimate a model of order `n_x`.
pub fn validate_dataset(d: &Dataset, n_x: usize) -> Result<()> {
    d.check_consistency(d.p.len() / d.n_p)?;
    if n_x == 0 {
        return Err(Error::invalid("n_x", "model order must be >= 1"));
    }
    if d.len() < n_x + 2 {
        return Err(Error::TooShort { n: d.len(), n_x });
    }
    Ok(())
}

/// Monic characteristic polynomial `q^n (1 + a1 q^-1 + ... + an q^-n)` of
/// the predictor matrix, stored as `[a1, ..., an]`.
///
/// Construction rejects polynomials with any root on or outside the unit
/// circle.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct AlphaPolynomial {
    coeffs: Vec<f64>,
}

impl AlphaPolynomial {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::invalid("alpha", "model order must be >= 1"));
        }
        check_finite("alpha", &coeffs)?;
        if !is_schur_stable(&coeffs) {
            return Err(Error::UnstablePolynomial);
        }
        Ok(AlphaPolynomial { coeffs })
    }

    /// `alpha(q) = q^n`: every predictor pole at the origin.
    pub fn origin(n_x: usize) -> Result<Self> {
        Self::new(vec![0.0; n_x])
    }

    /// Expands `prod (q - z_m)`. Complex roots must come in conjugate pairs.
    pub fn from_roots(roots: &[Complex64]) -> Result<Self> {
        let mut poly = vec![Complex64::new(1.0, 0.0)];
        for &z in roots {
            let mut next = vec![Complex64::new(0.0, 0.0); poly.len() + 1];
            for (i, &c) in poly.iter().enumerate() {
                next[i] += c;
                next[i + 1] -= c * z;
            }
            poly = next;
        }
        let scale = poly.iter().map(|c| c.norm()).fold(1.0, f64::max);
        if poly.iter().any(|c| c.im.abs() > 1e-9 * scale) {
            return Err(Error::invalid(
                "alpha",
                "complex roots must occur in conjugate pairs",
            ));
        }
        Self::new(poly[1..].iter().map(|c| c.re).collect())
    }

    pub fn n_x(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_origin(&self) -> bool {
        self.coeffs.iter().all(|&a| a == 0.0)
    }

    /// Roots of `alpha(q)`, i.e. the eigenvalues of the companion matrix.
    pub fn roots(&self) -> Vec<Complex64> {
        let (a, _) = companion_from_alpha(self);
        a.complex_eigenvalues().iter().copied().collect()
    }
}

impl<'de> Deserialize<'de> for AlphaPolynomial {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let coeffs = Vec::<f64>::deserialize(de)?;
        AlphaPolynomial::new(coeffs).map_err(serde::de::Error::custom)
    }
}

/// Schur-Cohn step-down test on `1 + a1 z^-1 + ... + an z^-n`.
fn is_schur_stable(coeffs: &[f64]) -> bool {
    let mut a: Vec<f64> = std::iter::once(1.0).chain(coeffs.iter().copied()).collect();
    while a.len() > 1 {
        let n = a.len() - 1;
        let k = a[n];
        if k.abs() >= 1.0 {
            return false;
        }
        let denom = 1.0 - k * k;
        a = (0..n).map(|i| (a[i] - k * a[n - i]) / denom).collect();
    }
    true
}

/// Companion pair with the polynomial coefficients in the last column of
/// `A` (reversed, negated), ones on the subdiagonal and `C = [0 ... 0 1]`.
pub fn companion_from_alpha(alpha: &AlphaPolynomial) -> (DMatrix<f64>, RowDVector<f64>) {
    let n = alpha.n_x();
    let mut a = DMatrix::zeros(n, n);
    for i in 1..n {
        a[(i, i - 1)] = 1.0;
    }
    for (i, &c) in alpha.coeffs.iter().rev().enumerate() {
        a[(i, n - 1)] = -c;
    }
    let mut c = RowDVector::zeros(n);
    c[n - 1] = 1.0;
    (a, c)
}

/// Regularization weight, RBF width and model order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub gamma: f64,
    pub sigma: f64,
    pub n_x: usize,
}

impl HyperParams {
    pub fn new(gamma: f64, sigma: f64, n_x: usize) -> Result<Self> {
        let h = HyperParams { gamma, sigma, n_x };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::invalid(
                "gamma",
                format!("must be > 0, got {}", self.gamma),
            ));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::invalid(
                "sigma",
                format!("must be > 0, got {}", self.sigma),
            ));
        }
        if self.n_x == 0 {
            return Err(Error::invalid("n_x", "model order must be >= 1"));
        }
        Ok(())
    }
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            gamma: 100.0,
            sigma: 0.2,
            n_x: 2,
        }
    }
}
