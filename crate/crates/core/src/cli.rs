//! Command-line front end.
//!
//! Exit codes: 0 success, 2 input validation, 3 numerical failure,
//! 4 tuning failure. Flags override values from `--config`.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::benchmark::{emit_report, run_monte_carlo, MonteCarloConfig};
use crate::error::Error;
use crate::estimator::{bfr, fit};
use crate::filter::butterworth_alpha;
use crate::io::{load_model, read_dataset_csv, read_record_csv, save_model, write_output_csv};
use crate::model::{AlphaPolynomial, HyperParams};
use crate::tuner::{tune_with, CuriositySet, TuneOptions, DEFAULT_MU};

#[derive(Debug, Parser)]
#[command(
    name = "lpv-lssvm",
    version,
    about = "LPV state-space identification with 2D-filtered LS-SVM"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model to a dataset and write it as JSON.
    Estimate(EstimateArgs),
    /// Tune the predictor cutoff and write the J table.
    Tune(TuneArgs),
    /// Simulate a saved model on an input/scheduling record.
    Simulate(SimulateArgs),
    /// Run the Monte Carlo case study and write plot-ready CSVs.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaMode {
    /// All predictor poles at the origin.
    Origin,
    /// Butterworth poles at `--omega-c`.
    Butterworth,
    /// Butterworth poles at the barycenter-tuned cutoff.
    Tuned,
}

impl fmt::Display for AlphaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AlphaMode::Origin => "origin",
            AlphaMode::Butterworth => "butterworth",
            AlphaMode::Tuned => "tuned",
        })
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelFlags {
    /// JSON config; see README for fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub nx: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    /// Comma-separated curiosity cutoffs in rad/s.
    #[arg(long, value_delimiter = ',')]
    pub omega_set: Option<Vec<f64>>,
    /// Sampling period in seconds.
    #[arg(long)]
    pub ts: Option<f64>,
    /// Score J on this trailing fraction of the record instead of the whole record.
    #[arg(long)]
    pub holdout: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    pub data: PathBuf,
    #[command(flatten)]
    pub flags: ModelFlags,
    #[arg(long, value_enum)]
    pub alpha_mode: Option<AlphaMode>,
    /// Cutoff in rad/s for `--alpha-mode butterworth`.
    #[arg(long)]
    pub omega_c: Option<f64>,
    #[arg(long, default_value = "model.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    pub data: PathBuf,
    #[command(flatten)]
    pub flags: ModelFlags,
    #[arg(long, default_value = "tune.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub model: PathBuf,
    pub data: PathBuf,
    #[arg(long, default_value = "y_sim.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// JSON file mirroring the Monte Carlo config fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub runs: Option<usize>,
    /// Target SNR in dB; `inf` for noiseless estimation data.
    #[arg(long)]
    pub snr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub nx: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub omega_set: Option<Vec<f64>>,
    #[arg(long, default_value = "benchmark_out")]
    pub out: PathBuf,
}

/// Failure with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::SingularSystem { .. } | Error::DivergedSimulation { .. } => 3,
            Error::AllDiverged => 4,
            _ => 2,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

fn io_failure(e: std::io::Error) -> CliError {
    CliError {
        code: 2,
        message: format!("cannot write output: {e}"),
    }
}

/// Optional settings accepted by `--config` for estimate and tune.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub n_x: Option<usize>,
    pub gamma: Option<f64>,
    pub sigma: Option<f64>,
    pub mu: Option<f64>,
    pub omegas: Option<Vec<f64>>,
    pub alpha_mode: Option<AlphaMode>,
    pub omega_c: Option<f64>,
    #[serde(rename = "Ts")]
    pub ts: Option<f64>,
    pub holdout_fraction: Option<f64>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()).into())
}

struct Resolved {
    hyper: HyperParams,
    curiosities: CuriositySet,
    ts: f64,
    options: TuneOptions,
    alpha_mode: AlphaMode,
    omega_c: Option<f64>,
}

fn resolve(
    flags: &ModelFlags,
    alpha_mode: Option<AlphaMode>,
    omega_c: Option<f64>,
) -> Result<Resolved, CliError> {
    let cfg: ModelConfig = match &flags.config {
        Some(path) => read_json(path)?,
        None => ModelConfig::default(),
    };
    let defaults = HyperParams::default();
    let hyper = HyperParams::new(
        flags.gamma.or(cfg.gamma).unwrap_or(defaults.gamma),
        flags.sigma.or(cfg.sigma).unwrap_or(defaults.sigma),
        flags.nx.or(cfg.n_x).unwrap_or(defaults.n_x),
    )?;
    let ts = flags.ts.or(cfg.ts).unwrap_or(1.0);
    if !(ts.is_finite() && ts > 0.0) {
        return Err(Error::invalid("Ts", format!("must be finite and > 0, got {ts}")).into());
    }
    let mu = flags.mu.or(cfg.mu).unwrap_or(DEFAULT_MU);
    let omegas = flags.omega_set.clone().or(cfg.omegas);
    let omegas = omegas.unwrap_or_else(|| CuriositySet::default_for(ts).omegas().to_vec());
    let curiosities = CuriositySet::new(omegas, mu)?;
    Ok(Resolved {
        hyper,
        curiosities,
        ts,
        options: TuneOptions {
            holdout_fraction: flags.holdout.or(cfg.holdout_fraction),
        },
        alpha_mode: alpha_mode.or(cfg.alpha_mode).unwrap_or(AlphaMode::Tuned),
        omega_c: omega_c.or(cfg.omega_c),
    })
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Estimate(args) => estimate(args, out),
        Command::Tune(args) => tune_cmd(args, out),
        Command::Simulate(args) => simulate(args, out),
        Command::Benchmark(args) => benchmark(args, out),
    }
}

fn estimate(args: EstimateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let r = resolve(&args.flags, args.alpha_mode, args.omega_c)?;
    let d = read_dataset_csv(&args.data, r.ts)?;
    let n_x = r.hyper.n_x;
    let (alpha, omega_c) = match r.alpha_mode {
        AlphaMode::Origin => (AlphaPolynomial::origin(n_x)?, None),
        AlphaMode::Butterworth => {
            let w = r.omega_c.ok_or_else(|| {
                Error::invalid("omega_c", "required with --alpha-mode butterworth")
            })?;
            (butterworth_alpha(w, r.ts, n_x)?, Some(w))
        }
        AlphaMode::Tuned => {
            let report = tune_with(&d, &r.hyper, &r.curiosities, r.options)?;
            (
                butterworth_alpha(report.omega_star, r.ts, n_x)?,
                Some(report.omega_star),
            )
        }
    };
    let model = fit(&d, &r.hyper, &alpha)?;
    save_model(&model, &args.out)?;

    writeln!(out, "model: {}", args.out.display()).map_err(io_failure)?;
    writeln!(out, "alpha_mode: {}", r.alpha_mode).map_err(io_failure)?;
    match omega_c {
        Some(w) => writeln!(out, "omega_c: {w}"),
        None => writeln!(out, "omega_c: baseline"),
    }
    .map_err(io_failure)?;
    let y_sim = model.simulate_dataset(&d)?;
    writeln!(out, "training_bfr: {}", bfr(d.y(), &y_sim)?).map_err(io_failure)?;
    Ok(())
}

fn tune_cmd(args: TuneArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let r = resolve(&args.flags, None, None)?;
    let d = read_dataset_csv(&args.data, r.ts)?;
    let report = tune_with(&d, &r.hyper, &r.curiosities, r.options)?;
    report.write_csv(&args.out)?;
    for e in &report.entries {
        writeln!(out, "omega: {} J: {} weight: {}", e.omega, e.j, e.weight).map_err(io_failure)?;
    }
    writeln!(out, "omega_star: {}", report.omega_star).map_err(io_failure)?;
    Ok(())
}

fn simulate(args: SimulateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let model = load_model(&args.model)?;
    let rec = read_record_csv(&args.data)?;
    let n_p = model.dataset().n_p();
    if let Some(row) = rec.p.iter().find(|row| row.len() != n_p) {
        return Err(Error::LengthMismatch {
            field: "p",
            expected: n_p,
            found: row.len(),
        }
        .into());
    }
    let y_sim = model.simulate(&rec.u, &rec.p_flat())?;
    write_output_csv(&y_sim, &args.out)?;
    writeln!(out, "output: {}", args.out.display()).map_err(io_failure)?;
    if let Some(y) = &rec.y {
        writeln!(out, "bfr: {}", bfr(y, &y_sim)?).map_err(io_failure)?;
    }
    Ok(())
}

fn benchmark(args: BenchmarkArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg: MonteCarloConfig = match &args.config {
        Some(path) => read_json(path)?,
        None => MonteCarloConfig::default(),
    };
    if let Some(runs) = args.runs {
        cfg.runs = runs;
    }
    if let Some(snr) = args.snr {
        cfg.snr_db = snr.is_finite().then_some(snr);
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(n_x) = args.nx {
        cfg.hyper.n_x = n_x;
    }
    if let Some(g) = args.gamma {
        cfg.hyper.gamma = g;
    }
    if let Some(s) = args.sigma {
        cfg.hyper.sigma = s;
    }
    if args.mu.is_some() || args.omega_set.is_some() {
        let omegas = args
            .omega_set
            .clone()
            .unwrap_or_else(|| cfg.curiosities.omegas().to_vec());
        cfg.curiosities = CuriositySet::new(omegas, args.mu.unwrap_or(cfg.curiosities.mu()))?;
    }
    let report = run_monte_carlo(&cfg)?;
    emit_report(&report, &args.out)?;
    writeln!(out, "report: {}", args.out.display()).map_err(io_failure)?;
    for s in report.summary() {
        writeln!(out, "{}: mean {:.2} std {:.2}", s.method, s.mean, s.std).map_err(io_failure)?;
    }
    let failed = report
        .records
        .iter()
        .filter(|r| r.failure.is_some())
        .count();
    if failed > 0 {
        writeln!(out, "failed records: {failed}").map_err(io_failure)?;
    }
    Ok(())
}
