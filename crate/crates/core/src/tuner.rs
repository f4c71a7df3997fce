//! Barycenter tuning of the Butterworth cutoff of the predictor filter.
//!
//! Each candidate cutoff ("curiosity point") is scored by the normalized
//! free-run simulation error `J` of a model fitted with it; the selected
//! cutoff is the average of the candidates weighted by `exp(-mu J)`.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{fit_with_gram, normalized_error};
use crate::filter::butterworth_alpha;
use crate::kernel::{gram_with_kernel, GramMatrix, Rbf};
use crate::model::{validate_dataset, Dataset, HyperParams};

/// Default candidate cutoffs, as `omega_c * Ts` in rad/sample.
pub const DEFAULT_CURIOSITIES: [f64; 6] = [0.05, 0.08, 0.13, 0.2, 0.32, 0.5];

pub const DEFAULT_MU: f64 = 130.0;

/// Candidate cutoffs (rad/s, strictly increasing) and the weighting constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCuriositySet")]
pub struct CuriositySet {
    omegas: Vec<f64>,
    mu: f64,
}

impl CuriositySet {
    pub fn new(omegas: Vec<f64>, mu: f64) -> Result<Self> {
        if omegas.is_empty() {
            return Err(Error::invalid(
                "omegas",
                "at least one curiosity point is required",
            ));
        }
        if omegas.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::invalid("omegas", "cutoffs must be finite and > 0"));
        }
        if omegas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid(
                "omegas",
                "cutoffs must be strictly increasing",
            ));
        }
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(Error::invalid(
                "mu",
                format!("must be finite and >= 0, got {mu}"),
            ));
        }
        Ok(CuriositySet { omegas, mu })
    }

    /// The six default cutoffs `{0.05, ..., 0.5} / Ts` rad/s with `mu = 130`.
    pub fn default_for(ts: f64) -> Self {
        CuriositySet {
            omegas: DEFAULT_CURIOSITIES.iter().map(|c| c / ts).collect(),
            mu: DEFAULT_MU,
        }
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    /// Checks every cutoff lies below the Nyquist frequency for `ts`.
    pub fn check_nyquist(&self, ts: f64) -> Result<()> {
        let nyquist = std::f64::consts::PI / ts;
        match self.omegas.iter().find(|&&w| w >= nyquist) {
            Some(&omega_c) => Err(Error::CutoffOutOfRange { omega_c, nyquist }),
            None => Ok(()),
        }
    }
}

#[derive(Deserialize)]
struct RawCuriositySet {
    omegas: Vec<f64>,
    #[serde(default = "default_mu")]
    mu: f64,
}

fn default_mu() -> f64 {
    DEFAULT_MU
}

impl TryFrom<RawCuriositySet> for CuriositySet {
    type Error = Error;

    fn try_from(raw: RawCuriositySet) -> Result<Self> {
        CuriositySet::new(raw.omegas, raw.mu)
    }
}

/// Normalized barycenter weights `exp(-mu J) / sum exp(-mu J)`.
pub fn barycenter_weights(mu: f64, j_values: &[f64]) -> Result<Vec<f64>> {
    if let Some(index) = j_values.iter().position(|j| !j.is_finite()) {
        return Err(Error::NonFinite { field: "J", index });
    }
    let shift = j_values
        .iter()
        .map(|j| mu * j)
        .fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = j_values.iter().map(|j| (shift - mu * j).exp()).collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / total).collect())
}

/// Barycenter of the curiosity points weighted by `exp(-mu J)`.
pub fn barycenter(curiosities: &CuriositySet, j_values: &[f64]) -> Result<f64> {
    if j_values.len() != curiosities.len() {
        return Err(Error::LengthMismatch {
            field: "J",
            expected: curiosities.len(),
            found: j_values.len(),
        });
    }
    let weights = barycenter_weights(curiosities.mu, j_values)?;
    let star: f64 = curiosities
        .omegas
        .iter()
        .zip(&weights)
        .map(|(w, a)| w * a)
        .sum();
    // Rounding can push the convex combination a few ulps outside the hull.
    let (lo, hi) = (
        curiosities.omegas[0],
        curiosities.omegas[curiosities.len() - 1],
    );
    Ok(star.clamp(lo, hi))
}

/// Score of one cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JEvaluation {
    pub omega: f64,
    #[serde(rename = "J")]
    pub j: f64,
    pub weight: f64,
    /// True when the simulation diverged and `J` was set to 1.
    pub diverged: bool,
}

/// Outcome of a tuning sweep, ordered by curiosity index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuneReport {
    pub omega_star: f64,
    pub entries: Vec<JEvaluation>,
}

impl TuneReport {
    /// Writes `omega,J,weight` rows followed by `omega_star,<value>,`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let mut body = String::from("omega,J,weight\n");
        for e in &self.entries {
            body.push_str(&format!("{},{},{}\n", e.omega, e.j, e.weight));
        }
        body.push_str(&format!("omega_star,{},\n", self.omega_star));
        w.write_all(body.as_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }
}

/// Tuning options beyond the curiosity set.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TuneOptions {
    /// When set, fit on the leading `1 - f` of the record and score `J` on
    /// the trailing fraction `f`. Scoring on the estimation data is the default.
    pub holdout_fraction: Option<f64>,
}

/// `min(||Y - Yhat(omega)|| / ||Y - mean(Y)||, 1)` for a model fitted at
/// cutoff `omega` and simulated on the same record.
pub fn j_index(d: &Dataset, hyper: &HyperParams, omega: f64) -> Result<f64> {
    validate_dataset(d, hyper.n_x)?;
    let g = gram_with_kernel(d, hyper.n_x, &Rbf { sigma: hyper.sigma })?;
    score(d, d, hyper, &g, omega).map(|(j, _)| j)
}

fn score(
    fit_data: &Dataset,
    eval_data: &Dataset,
    hyper: &HyperParams,
    g: &GramMatrix,
    omega: f64,
) -> Result<(f64, bool)> {
    let alpha = butterworth_alpha(omega, fit_data.ts(), hyper.n_x)?;
    let model = fit_with_gram(fit_data, hyper, &alpha, Rbf { sigma: hyper.sigma }, g)?;
    match model.simulate_dataset(eval_data) {
        Ok(y_sim) => Ok((normalized_error(eval_data.y(), &y_sim)?.min(1.0), false)),
        Err(Error::DivergedSimulation { .. }) => Ok((1.0, true)),
        Err(e) => Err(e),
    }
}

/// Scores every curiosity point and returns the barycenter cutoff.
///
/// The final model is not refitted here.
pub fn tune(d: &Dataset, hyper: &HyperParams, curiosities: &CuriositySet) -> Result<TuneReport> {
    tune_with(d, hyper, curiosities, TuneOptions::default())
}

pub fn tune_with(
    d: &Dataset,
    hyper: &HyperParams,
    curiosities: &CuriositySet,
    options: TuneOptions,
) -> Result<TuneReport> {
    hyper.validate()?;
    curiosities.check_nyquist(d.ts())?;
    let (fit_data, eval_data) = match options.holdout_fraction {
        None => (d.clone(), d.clone()),
        Some(f) => {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::invalid(
                    "holdout_fraction",
                    format!("must lie in (0, 1), got {f}"),
                ));
            }
            let split = ((1.0 - f) * d.len() as f64).round() as usize;
            (d.slice(0..split), d.slice(split..d.len()))
        }
    };
    validate_dataset(&fit_data, hyper.n_x)?;
    let g = gram_with_kernel(&fit_data, hyper.n_x, &Rbf { sigma: hyper.sigma })?;

    let scores: Vec<(f64, bool)> = curiosities
        .omegas
        .par_iter()
        .map(|&omega| score(&fit_data, &eval_data, hyper, &g, omega))
        .collect::<Result<_>>()?;

    if scores.iter().all(|&(_, diverged)| diverged) {
        return Err(Error::AllDiverged);
    }
    let j_values: Vec<f64> = scores.iter().map(|s| s.0).collect();
    let weights = barycenter_weights(curiosities.mu, &j_values)?;
    let omega_star = barycenter(curiosities, &j_values)?;
    let entries = curiosities
        .omegas
        .iter()
        .zip(&scores)
        .zip(&weights)
        .map(|((&omega, &(j, diverged)), &weight)| JEvaluation {
            omega,
            j,
            weight,
            diverged,
        })
        .collect();
    Ok(TuneReport {
        omega_star,
        entries,
    })
}
