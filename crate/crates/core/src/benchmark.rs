//! Monte Carlo case study on an LPV extension of the Astrom system.
//!
//! Each run draws fresh estimation data at the configured SNR, fits a
//! baseline model with every predictor pole at the origin and a filtered
//! model whose Butterworth cutoff is chosen by barycenter tuning, and scores
//! both on an independent noiseless validation record.

use std::fmt;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{bfr, fit_with_gram, TrainedModel};
use crate::filter::butterworth_alpha;
use crate::kernel::{gram_with_kernel, Rbf};
use crate::model::{AlphaPolynomial, Dataset, HyperParams};
use crate::tuner::{tune_with, CuriositySet, TuneOptions};

/// Number of points on the scheduling grid used for coefficient curves.
pub const COEFF_GRID_POINTS: usize = 101;

/// Number of histogram bins in `hist.csv`.
pub const HIST_BINS: usize = 20;

/// Which `sinc` the `a11` coefficient uses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SincConvention {
    /// `sin(pi x) / (pi x)`
    #[default]
    Normalized,
    /// `sin(x) / x`
    Unnormalized,
}

impl SincConvention {
    pub fn eval(self, x: f64) -> f64 {
        let arg = match self {
            SincConvention::Normalized => std::f64::consts::PI * x,
            SincConvention::Unnormalized => x,
        };
        if arg == 0.0 {
            1.0
        } else {
            arg.sin() / arg
        }
    }
}

/// Second-order LPV data-generating system
///
/// ```text
/// x[k+1] = [a11(p) 1; a21(p) 0] x[k] + [b1(p); b2(p)] u[k]
/// y[k]   = x1[k] + v[k]
/// ```
///
/// with scheduling in `[-0.25, 0.25]`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AstromLpvSystem {
    pub sinc: SincConvention,
}

impl AstromLpvSystem {
    pub const P_MIN: f64 = -0.25;
    pub const P_MAX: f64 = 0.25;

    pub fn a11(&self, p: f64) -> f64 {
        let pi2 = std::f64::consts::PI.powi(2);
        0.35 * self.sinc.eval(pi2 * p) + 1.4
    }

    pub fn a21(&self, p: f64) -> f64 {
        5.0 * p * p - 0.8
    }

    pub fn b1(&self, p: f64) -> f64 {
        if p > 0.125 {
            1.5
        } else if p < -0.125 {
            0.5
        } else {
            1.0 + 4.0 * p
        }
    }

    pub fn b2(&self, p: f64) -> f64 {
        if p > 0.125 {
            0.0
        } else if p < -0.125 {
            1.0
        } else {
            0.5 - 4.0 * p
        }
    }

    /// True lag coefficients `[a11, a21, b1, b2]` at `p`, in the same order as
    /// [`CoefficientCurves`] columns.
    pub fn lag_coefficients(&self, p: f64) -> [f64; 4] {
        [self.a11(p), self.a21(p), self.b1(p), self.b2(p)]
    }

    /// Noiseless output from a zero initial state.
    pub fn simulate(&self, u: &[f64], p: &[f64]) -> Vec<f64> {
        let (mut x1, mut x2) = (0.0, 0.0);
        u.iter()
            .zip(p)
            .map(|(&uk, &pk)| {
                let y = x1;
                let next1 = self.a11(pk) * x1 + x2 + self.b1(pk) * uk;
                let next2 = self.a21(pk) * x1 + self.b2(pk) * uk;
                x1 = next1;
                x2 = next2;
                y
            })
            .collect()
    }
}

/// Noisy estimation record plus the noiseless output it was built from.
#[derive(Debug, Clone)]
pub struct GeneratedData {
    pub dataset: Dataset,
    pub y_clean: Vec<f64>,
}

fn variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

/// Draws a binary +-1 input, uniform scheduling and Gaussian output noise
/// scaled so that the empirical SNR equals `snr_db` exactly. `None` means
/// noiseless.
pub fn generate(
    sys: &AstromLpvSystem,
    n: usize,
    snr_db: Option<f64>,
    seed: u64,
) -> Result<GeneratedData> {
    generate_with_rng(sys, n, snr_db, 1.0, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn generate_with_rng<R: Rng + ?Sized>(
    sys: &AstromLpvSystem,
    n: usize,
    snr_db: Option<f64>,
    ts: f64,
    rng: &mut R,
) -> Result<GeneratedData> {
    if n == 0 {
        return Err(Error::invalid("N", "must be >= 1"));
    }
    let u: Vec<f64> = (0..n)
        .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
        .collect();
    let p: Vec<f64> = (0..n)
        .map(|_| rng.random_range(AstromLpvSystem::P_MIN..=AstromLpvSystem::P_MAX))
        .collect();
    let y_clean = sys.simulate(&u, &p);
    let y = match snr_db {
        Some(snr) if snr.is_finite() => {
            let z: Vec<f64> = (0..n)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            let target = variance(&y_clean) / 10f64.powf(snr / 10.0);
            let vz = variance(&z);
            let scale = if vz > 0.0 { (target / vz).sqrt() } else { 0.0 };
            y_clean.iter().zip(&z).map(|(y, z)| y + scale * z).collect()
        }
        _ => y_clean.clone(),
    };
    let dataset = Dataset::scalar(u, y, p, ts)?;
    Ok(GeneratedData { dataset, y_clean })
}

/// Monte Carlo experiment settings. Field names match the JSON config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub runs: usize,
    #[serde(rename = "N")]
    pub n: usize,
    /// `null` for noiseless estimation data.
    pub snr_db: Option<f64>,
    pub seed: u64,
    #[serde(rename = "validation_N")]
    pub validation_n: usize,
    pub hyper: HyperParams,
    pub curiosities: CuriositySet,
    #[serde(rename = "Ts")]
    pub ts: f64,
    pub sinc: SincConvention,
    pub holdout_fraction: Option<f64>,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        MonteCarloConfig {
            runs: 20,
            n: 800,
            snr_db: Some(20.0),
            seed: 0,
            validation_n: 800,
            hyper: HyperParams::default(),
            curiosities: CuriositySet::default_for(1.0),
            ts: 1.0,
            sinc: SincConvention::Normalized,
            holdout_fraction: None,
        }
    }
}

impl MonteCarloConfig {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::invalid("runs", "must be >= 1"));
        }
        if self.n < 10 || self.n < self.hyper.n_x + 2 {
            return Err(Error::invalid(
                "N",
                format!("must be >= max(10, n_x + 2), got {}", self.n),
            ));
        }
        if self.validation_n < 2 {
            return Err(Error::invalid("validation_N", "must be >= 2"));
        }
        if !(self.ts.is_finite() && self.ts > 0.0) {
            return Err(Error::invalid(
                "Ts",
                format!("must be finite and > 0, got {}", self.ts),
            ));
        }
        if let Some(snr) = self.snr_db {
            if snr.is_nan() {
                return Err(Error::invalid("snr_db", "must be a number or null"));
            }
        }
        self.hyper.validate()?;
        self.curiosities.check_nyquist(self.ts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Baseline,
    Filtered,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::Baseline, Method::Filtered];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Baseline => "baseline",
            Method::Filtered => "filtered",
        })
    }
}

/// One model's outcome in one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub run: usize,
    pub method: Method,
    pub bfr: f64,
    pub omega_star: Option<f64>,
    /// Failure message when fitting or validation failed; `bfr` is then 0.
    pub failure: Option<String>,
    /// Max absolute error of `[a11, a21, b1, b2]` over the scheduling grid
    /// (NaN when the run failed).
    pub coeff_max_error: [f64; 4],
}

/// Coefficient functions over the scheduling grid, for one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientCurves {
    pub run: usize,
    pub grid: Vec<f64>,
    /// `[a11, a21, b1, b2]` per grid point.
    pub truth: Vec<[f64; 4]>,
    pub baseline: Option<Vec<[f64; 4]>>,
    pub filtered: Option<Vec<[f64; 4]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: Method,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub baseline: Vec<usize>,
    pub filtered: Vec<usize>,
}

/// Per-run records (sorted by run, then method) and coefficient curves of
/// the designated run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkReport {
    pub config: MonteCarloConfig,
    pub records: Vec<RunRecord>,
    pub curves: Option<CoefficientCurves>,
}

impl BenchmarkReport {
    pub fn bfrs(&self, method: Method) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.method == method)
            .map(|r| r.bfr)
            .collect()
    }

    /// Mean and sample standard deviation of the BFR per method.
    pub fn summary(&self) -> Vec<MethodSummary> {
        Method::ALL
            .iter()
            .filter_map(|&method| {
                let v = self.bfrs(method);
                if v.is_empty() {
                    return None;
                }
                let n = v.len() as f64;
                let mean = v.iter().sum::<f64>() / n;
                let std = if v.len() > 1 {
                    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
                } else {
                    0.0
                };
                Some(MethodSummary { method, mean, std })
            })
            .collect()
    }

    /// Equal-width bins spanning the integer range around all BFRs.
    pub fn histogram(&self, bins: usize) -> Histogram {
        if self.records.is_empty() || bins == 0 {
            return Histogram {
                edges: vec![],
                baseline: vec![],
                filtered: vec![],
            };
        }
        let all = self.records.iter().map(|r| r.bfr);
        let lo = all.clone().fold(f64::INFINITY, f64::min).floor();
        let mut hi = all.fold(f64::NEG_INFINITY, f64::max).ceil();
        if hi <= lo {
            hi = lo + 1.0;
        }
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
        let count = |method: Method| {
            let mut c = vec![0; bins];
            for v in self.bfrs(method) {
                let idx = (((v - lo) / width).floor() as usize).min(bins - 1);
                c[idx] += 1;
            }
            c
        };
        Histogram {
            edges,
            baseline: count(Method::Baseline),
            filtered: count(Method::Filtered),
        }
    }
}

/// Uniform scheduling grid over the scheduling interval.
pub fn coefficient_grid() -> Vec<f64> {
    let (lo, hi) = (AstromLpvSystem::P_MIN, AstromLpvSystem::P_MAX);
    (0..COEFF_GRID_POINTS)
        .map(|i| lo + (hi - lo) * i as f64 / (COEFF_GRID_POINTS - 1) as f64)
        .collect()
}

/// Estimated `[a11, a21, b1, b2]` of a model over `grid`. Lags beyond the
/// model order read as zero.
pub fn estimated_coefficients(model: &TrainedModel, grid: &[f64]) -> Vec<[f64; 4]> {
    grid.iter()
        .map(|&p| {
            let (a, b) = model.reconstruct(&[p]).lag_coefficients(model.alpha());
            let lag = |v: &[f64], m: usize| v.get(m).copied().unwrap_or(0.0);
            [lag(&a, 0), lag(&a, 1), lag(&b, 0), lag(&b, 1)]
        })
        .collect()
}

fn max_errors(truth: &[[f64; 4]], est: &[[f64; 4]]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (t, e) in truth.iter().zip(est) {
        for c in 0..4 {
            out[c] = f64::max(out[c], (t[c] - e[c]).abs());
        }
    }
    out
}

fn run_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

struct MethodOutcome {
    record: RunRecord,
    curve: Option<Vec<[f64; 4]>>,
}

struct RunOutcome {
    baseline: MethodOutcome,
    filtered: MethodOutcome,
}

fn score_model(
    model: Result<TrainedModel>,
    validation: &GeneratedData,
    truth: &[[f64; 4]],
    grid: &[f64],
    run: usize,
    method: Method,
    omega_star: Option<f64>,
) -> MethodOutcome {
    let scored = model.and_then(|m| {
        let y = m.simulate_dataset(&validation.dataset)?;
        let fit = bfr(&validation.y_clean, &y)?;
        Ok((fit, estimated_coefficients(&m, grid)))
    });
    match scored {
        Ok((fit, curve)) => MethodOutcome {
            record: RunRecord {
                run,
                method,
                bfr: fit,
                omega_star,
                failure: None,
                coeff_max_error: max_errors(truth, &curve),
            },
            curve: Some(curve),
        },
        Err(e) => MethodOutcome {
            record: RunRecord {
                run,
                method,
                bfr: 0.0,
                omega_star,
                failure: Some(e.to_string()),
                coeff_max_error: [f64::NAN; 4],
            },
            curve: None,
        },
    }
}

fn run_once(cfg: &MonteCarloConfig, sys: &AstromLpvSystem, run: usize) -> Result<RunOutcome> {
    let estimation = generate_with_rng(
        sys,
        cfg.n,
        cfg.snr_db,
        cfg.ts,
        &mut run_rng(cfg.seed, 2 * run as u64),
    )?;
    let validation = generate_with_rng(
        sys,
        cfg.validation_n,
        None,
        cfg.ts,
        &mut run_rng(cfg.seed, 2 * run as u64 + 1),
    )?;
    let grid = coefficient_grid();
    let truth: Vec<[f64; 4]> = grid.iter().map(|&p| sys.lag_coefficients(p)).collect();

    let d = &estimation.dataset;
    let hyper = &cfg.hyper;
    let kernel = Rbf { sigma: hyper.sigma };
    let g = gram_with_kernel(d, hyper.n_x, &kernel)?;

    let baseline_model = AlphaPolynomial::origin(hyper.n_x)
        .and_then(|alpha| fit_with_gram(d, hyper, &alpha, kernel, &g));
    let baseline = score_model(
        baseline_model,
        &validation,
        &truth,
        &grid,
        run,
        Method::Baseline,
        None,
    );

    let options = TuneOptions {
        holdout_fraction: cfg.holdout_fraction,
    };
    let tuned = tune_with(d, hyper, &cfg.curiosities, options);
    let omega_star = tuned.as_ref().ok().map(|t| t.omega_star);
    let filtered_model = tuned.and_then(|t| {
        let alpha = butterworth_alpha(t.omega_star, d.ts(), hyper.n_x)?;
        fit_with_gram(d, hyper, &alpha, kernel, &g)
    });
    let filtered = score_model(
        filtered_model,
        &validation,
        &truth,
        &grid,
        run,
        Method::Filtered,
        omega_star,
    );
    Ok(RunOutcome { baseline, filtered })
}

/// Runs the experiment. Run `r` draws its estimation and validation data
/// from dedicated streams of a generator seeded with `cfg.seed`, so results
/// do not depend on scheduling across threads.
pub fn run_monte_carlo(cfg: &MonteCarloConfig) -> Result<BenchmarkReport> {
    cfg.validate()?;
    let sys = AstromLpvSystem { sinc: cfg.sinc };
    let outcomes: Vec<RunOutcome> = (0..cfg.runs)
        .into_par_iter()
        .map(|run| run_once(cfg, &sys, run))
        .collect::<Result<_>>()?;

    let grid = coefficient_grid();
    let curves = outcomes.first().map(|o| CoefficientCurves {
        run: 0,
        truth: grid.iter().map(|&p| sys.lag_coefficients(p)).collect(),
        grid: grid.clone(),
        baseline: o.baseline.curve.clone(),
        filtered: o.filtered.curve.clone(),
    });
    let mut records: Vec<RunRecord> = outcomes
        .into_iter()
        .flat_map(|o| [o.baseline.record, o.filtered.record])
        .collect();
    records.sort_by_key(|r| (r.run, r.method));
    Ok(BenchmarkReport {
        config: cfg.clone(),
        records,
        curves,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes `summary.csv`, `runs.csv`, `hist.csv`, `coeffs.csv` and
/// `metadata.json` into `dir` (created if missing).
pub fn emit_report(rep: &BenchmarkReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut summary = String::from("method,mean,std\n");
    for s in rep.summary() {
        summary.push_str(&format!("{},{},{}\n", s.method, s.mean, s.std));
    }
    write_file(&dir.join("summary.csv"), &summary)?;

    let mut runs = String::from("run,method,bfr,omega_star,failed,err_a11,err_a21,err_b1,err_b2\n");
    for r in &rep.records {
        let e = r.coeff_max_error;
        runs.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.run,
            r.method,
            r.bfr,
            opt(r.omega_star),
            r.failure.is_some(),
            e[0],
            e[1],
            e[2],
            e[3]
        ));
    }
    write_file(&dir.join("runs.csv"), &runs)?;

    let hist = rep.histogram(HIST_BINS);
    let mut h = String::from("bin_lo,bin_hi,baseline,filtered\n");
    for i in 0..hist.baseline.len() {
        h.push_str(&format!(
            "{},{},{},{}\n",
            hist.edges[i],
            hist.edges[i + 1],
            hist.baseline[i],
            hist.filtered[i]
        ));
    }
    write_file(&dir.join("hist.csv"), &h)?;

    let names = ["a11", "a21", "b1", "b2"];
    let mut header = vec!["p".to_string()];
    for prefix in ["true", "baseline", "filtered"] {
        header.extend(names.iter().map(|n| format!("{prefix}_{n}")));
    }
    let mut coeffs = header.join(",") + "\n";
    if let Some(c) = &rep.curves {
        for (i, p) in c.grid.iter().enumerate() {
            let mut row = vec![p.to_string()];
            row.extend(c.truth[i].iter().map(f64::to_string));
            for est in [&c.baseline, &c.filtered] {
                match est {
                    Some(v) => row.extend(v[i].iter().map(f64::to_string)),
                    None => row.extend(std::iter::repeat_n(String::new(), 4)),
                }
            }
            coeffs.push_str(&(row.join(",") + "\n"));
        }
    }
    write_file(&dir.join("coeffs.csv"), &coeffs)?;

    let metadata = serde_json::json!({
        "config": rep.config,
        "sinc": rep.config.sinc,
        "validation": {
            "length": rep.config.validation_n,
            "excitation": "independent binary +-1 input and uniform scheduling, noiseless output",
            "initial_state": "zero",
        },
        "coeffs_grid": {
            "points": COEFF_GRID_POINTS,
            "min": AstromLpvSystem::P_MIN,
            "max": AstromLpvSystem::P_MAX,
            "run": rep.curves.as_ref().map(|c| c.run),
        },
        "histogram_bins": HIST_BINS,
        "failed_records": rep.records.iter().filter(|r| r.failure.is_some()).count(),
    });
    let text = serde_json::to_string_pretty(&metadata).expect("metadata serializes");
    write_file(&dir.join("metadata.json"), &(text + "\n"))
}
