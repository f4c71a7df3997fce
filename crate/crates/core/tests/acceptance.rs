//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any fails.

mod common;

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use common::{poly_kernel, primal_ridge, relative_error};
use lpv_lssvm::benchmark::{
    emit_report, generate, run_monte_carlo, AstromLpvSystem, BenchmarkReport, Method,
    MonteCarloConfig,
};
use lpv_lssvm::estimator::fit_with_kernel;
use lpv_lssvm::io::write_dataset_csv;
use lpv_lssvm::kernel::gram_with_kernel;
use lpv_lssvm::tuner::barycenter;
use lpv_lssvm::{
    butterworth_alpha, filter_gram_2d, gram, iir_filter_1d, rbf, AlphaPolynomial, CuriositySet,
    GramMatrix, HyperParams,
};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn monte_carlo(snr: f64) -> BenchmarkReport {
    let cfg = MonteCarloConfig {
        runs: 20,
        snr_db: Some(snr),
        ..MonteCarloConfig::default()
    };
    assert_eq!(
        (cfg.n, cfg.hyper),
        (800, HyperParams::new(100.0, 0.2, 2).unwrap())
    );
    assert_eq!(cfg.curiosities.mu(), 130.0);
    run_monte_carlo(&cfg).expect("benchmark runs")
}

fn failures(rep: &BenchmarkReport) -> usize {
    rep.records.iter().filter(|r| r.failure.is_some()).count()
}

fn table_20db(rep: &BenchmarkReport) -> Outcome {
    let base = rep.bfrs(Method::Baseline);
    let filt = rep.bfrs(Method::Filtered);
    let wins = base.iter().zip(&filt).filter(|(b, f)| f > b).count();
    let frac = wins as f64 / base.len() as f64;
    let (mb, mf) = (mean(&base), mean(&filt));
    outcome(
        mf >= 90.0 && (65.0..=90.0).contains(&mb) && frac >= 0.95 && failures(rep) == 0,
        format!("filtered mean {mf:.2} (>= 90), baseline mean {mb:.2} (in [65, 90]), filtered wins {wins}/{}", base.len()),
    )
}

fn table_10db(rep: &BenchmarkReport) -> Outcome {
    let mb = mean(&rep.bfrs(Method::Baseline));
    let mf = mean(&rep.bfrs(Method::Filtered));
    outcome(
        mf >= 80.0 && mb <= 60.0 && failures(rep) == 0,
        format!("filtered mean {mf:.2} (>= 80), baseline mean {mb:.2} (<= 60)"),
    )
}

fn coefficient_tracking(rep: &BenchmarkReport) -> Outcome {
    let runs = rep.config.runs;
    let mut good = 0;
    for run in 0..runs {
        let get = |m| {
            rep.records
                .iter()
                .find(|r| r.run == run && r.method == m)
                .unwrap()
        };
        let (b, f) = (get(Method::Baseline), get(Method::Filtered));
        let better = (0..4)
            .filter(|&i| f.coeff_max_error[i] < b.coeff_max_error[i])
            .count();
        if better >= 3 {
            good += 1;
        }
    }
    let frac = good as f64 / runs as f64;
    outcome(
        frac >= 0.9,
        format!("filtered better on >= 3 of 4 functions in {good}/{runs} runs"),
    )
}

fn random_stable_alpha(rng: &mut impl Rng, n_x: usize) -> AlphaPolynomial {
    let r = rng.random_range(0.0..0.95);
    let roots = if n_x == 1 {
        vec![Complex64::new(rng.random_range(-r..=r), 0.0)]
    } else if rng.random_bool(0.5) {
        let th = rng.random_range(0.0..PI);
        vec![Complex64::from_polar(r, th), Complex64::from_polar(r, -th)]
    } else {
        vec![
            Complex64::new(r, 0.0),
            Complex64::new(rng.random_range(-0.95..0.95), 0.0),
        ]
    };
    AlphaPolynomial::from_roots(&roots).unwrap()
}

fn primal_dual() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for degree in [1, 2] {
        for n_x in [1, 2] {
            for _ in 0..10 {
                let n = rng.random_range(n_x + 6..=30);
                let alpha = random_stable_alpha(&mut rng, n_x);
                let gamma = 10f64.powf(rng.random_range(-1.0..4.0));
                let d = generate(&AstromLpvSystem::default(), n, Some(15.0), rng.random())
                    .unwrap()
                    .dataset;
                let hyper = HyperParams::new(gamma, 1.0, n_x).unwrap();
                let model = fit_with_kernel(&d, &hyper, &alpha, poly_kernel(degree)).unwrap();
                let primal = primal_ridge(&d, n_x, degree, alpha.coeffs(), gamma);
                worst = worst.max(relative_error(
                    &model.in_sample_predictions(),
                    &primal.predictions,
                ));
                cases += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-6 && secs < 1.0,
        format!("{cases} cases, worst relative error {worst:.2e} (<= 1e-6), {secs:.3} s (< 1 s)"),
    )
}

fn random_symmetric(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = rng.random_range(-1.0..1.0);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

fn filter_recursion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut residual, mut absolute, mut largest, mut separability): (f64, f64, f64, f64) =
        (0.0, 0.0, 0.0, 0.0);
    for trial in 0..60 {
        let n = if trial < 4 {
            50
        } else {
            rng.random_range(1..=50)
        };
        let n_x = 1 + trial % 4;
        let alpha = butterworth_alpha(rng.random_range(0.02..3.0), 1.0, n_x).unwrap();
        let g = random_symmetric(&mut rng, n);
        let k = filter_gram_2d(
            &alpha,
            &GramMatrix {
                entries: g.clone(),
                n_x,
                n: n + n_x,
            },
        )
        .entries;

        let a: Vec<f64> = std::iter::once(1.0)
            .chain(alpha.coeffs().iter().copied())
            .collect();
        for i in 0..n {
            for j in 0..n {
                let (mut s, mut mag) = (0.0, 0.0);
                for (l, al) in a.iter().enumerate().take(i + 1) {
                    for (r, ar) in a.iter().enumerate().take(j + 1) {
                        let term = al * ar * k[(i - l, j - r)];
                        s += term;
                        mag += term.abs();
                    }
                }
                // Measured against the size of the summed terms: at low
                // cutoffs K grows like the squared DC gain and no evaluation
                // of the sum can be more accurate than that in absolute terms.
                let err = (s - g[(i, j)]).abs();
                absolute = absolute.max(err);
                residual = residual.max(err / mag.max(1.0));
            }
        }

        // Rows first, then columns, with the one-dimensional filter.
        let mut alt = g.clone();
        for i in 0..n {
            let row: Vec<f64> = alt.row(i).iter().copied().collect();
            for (j, v) in iir_filter_1d(&alpha, &row).into_iter().enumerate() {
                alt[(i, j)] = v;
            }
        }
        for j in 0..n {
            let col: Vec<f64> = alt.column(j).iter().copied().collect();
            for (i, v) in iir_filter_1d(&alpha, &col).into_iter().enumerate() {
                alt[(i, j)] = v;
            }
        }
        largest = largest.max(k.amax());
        separability = separability.max((&alt - &k).amax() / k.amax().max(1.0));
    }
    outcome(
        residual <= 1e-10 && separability <= 1e-12,
        format!(
            "max residual {residual:.2e} relative to summed terms (<= 1e-10; absolute {absolute:.1e} with max |K| {largest:.1e}), separability {separability:.2e} (<= 1e-12)"
        ),
    )
}

fn barycenter_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let ts = 1.0;
    let nyquist = PI / ts;
    let mut ok = true;
    let mut notes = Vec::new();
    for _ in 0..200 {
        let len = rng.random_range(1..=8);
        let mut omegas: Vec<f64> = (0..len).map(|_| rng.random_range(0.01..3.1)).collect();
        omegas.sort_by(f64::total_cmp);
        omegas.dedup();
        let j: Vec<f64> = (0..omegas.len())
            .map(|_| rng.random_range(0.0..1.0))
            .collect();
        let lo = omegas[0];
        let hi = *omegas.last().unwrap();

        let w = barycenter(&CuriositySet::new(omegas.clone(), 130.0).unwrap(), &j).unwrap();
        if !(lo..=hi).contains(&w) {
            ok = false;
            notes.push(format!("hull violated: {w}"));
        }
        let w0 = barycenter(&CuriositySet::new(omegas.clone(), 0.0).unwrap(), &j).unwrap();
        if (w0 - mean(&omegas)).abs() > 1e-12 * hi {
            ok = false;
            notes.push("mu = 0 is not the mean".into());
        }
        // Separated J values so the argmin is unambiguous at mu = 1e6.
        let mut ranks: Vec<usize> = (0..omegas.len()).collect();
        ranks.shuffle(&mut rng);
        let jsep: Vec<f64> = ranks.iter().map(|&r| 0.2 + 0.01 * r as f64).collect();
        let best = (0..omegas.len())
            .min_by(|&a, &b| jsep[a].total_cmp(&jsep[b]))
            .unwrap();
        let wm = barycenter(&CuriositySet::new(omegas.clone(), 1e6).unwrap(), &jsep).unwrap();
        if (wm - omegas[best]).abs() > 1e-9 * nyquist {
            ok = false;
            notes.push(format!("mu = 1e6 gave {wm}, argmin {}", omegas[best]));
        }
    }
    let two = barycenter(
        &CuriositySet::new(vec![0.1, 0.2], 130.0).unwrap(),
        &[0.1, 0.3],
    )
    .unwrap();
    let closed = (0.1 + 0.2 * (-26f64).exp()) / (1.0 + (-26f64).exp());
    if (two - closed).abs() > 1e-8 || (two - 0.1).abs() > 1e-8 {
        ok = false;
        notes.push(format!("two-point case gave {two}"));
    }
    let mid = barycenter(
        &CuriositySet::new(vec![0.1, 0.3], 130.0).unwrap(),
        &[0.4, 0.4],
    )
    .unwrap();
    ok &= (mid - 0.2).abs() <= 1e-15;
    let detail = if notes.is_empty() {
        format!("hull, mu = 0 mean, mu = 1e6 argmin, two-point {two:.12}")
    } else {
        notes.join("; ")
    };
    outcome(ok, detail)
}

fn gram_properties() -> Outcome {
    let mut ok = true;
    let mut worst_ratio: f64 = 0.0;
    let mut worst_sym: f64 = 0.0;
    for (seed, n, n_x, sigma) in [
        (1, 200, 2, 0.2),
        (2, 120, 1, 0.05),
        (3, 80, 3, 1.0),
        (4, 300, 2, 0.01),
    ] {
        let d = generate(&AstromLpvSystem::default(), n, Some(20.0), seed)
            .unwrap()
            .dataset;
        let g = gram(&d, &HyperParams::new(100.0, sigma, n_x).unwrap()).unwrap();
        let e = &g.entries;
        worst_sym = worst_sym.max((e - e.transpose()).amax());
        let norm = e.norm();
        let min_eig = SymmetricEigen::new(e.clone()).eigenvalues.min();
        worst_ratio = worst_ratio.min(min_eig / norm);
        ok &= min_eig >= -1e-8 * norm;
        let k = filter_gram_2d(&AlphaPolynomial::origin(n_x).unwrap(), &g);
        ok &= k.entries == g.entries;
        for k in 0..n {
            ok &= rbf(d.p(k), d.p(k), sigma) == 1.0;
        }
    }
    let custom = gram_with_kernel(
        &generate(&AstromLpvSystem::default(), 40, None, 9)
            .unwrap()
            .dataset,
        2,
        &poly_kernel(2),
    )
    .unwrap();
    ok &= filter_gram_2d(&AlphaPolynomial::origin(2).unwrap(), &custom).entries == custom.entries;
    ok &= worst_sym == 0.0;
    outcome(
        ok,
        format!("symmetric (max asym {worst_sym:e}), min eig / |G| = {worst_ratio:.2e} (>= -1e-8), psi(p,p) = 1, origin filter is identity"),
    )
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn field(out: &[u8], key: &str) -> Option<String> {
    let prefix = format!("{key}: ");
    String::from_utf8_lossy(out)
        .lines()
        .find_map(|l| l.strip_prefix(&prefix).map(str::to_string))
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = MonteCarloConfig {
        runs: 4,
        n: 300,
        validation_n: 300,
        seed: 7,
        ..MonteCarloConfig::default()
    };
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    emit_report(&run_monte_carlo(&cfg).unwrap(), &a).unwrap();
    emit_report(&run_monte_carlo(&cfg).unwrap(), &b).unwrap();
    let reports_equal = dir_bytes(&a) == dir_bytes(&b);

    let bin = env!("CARGO_BIN_EXE_lpv-lssvm");
    let d = generate(&AstromLpvSystem::default(), 800, Some(20.0), 21)
        .unwrap()
        .dataset;
    let data = tmp.path().join("d.csv");
    write_dataset_csv(&d, &data).unwrap();
    let model = tmp.path().join("model.json");
    let est = Command::new(bin)
        .args([
            "estimate",
            data.to_str().unwrap(),
            "--out",
            model.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    let sim = Command::new(bin)
        .args([
            "simulate",
            model.to_str().unwrap(),
            data.to_str().unwrap(),
            "--out",
        ])
        .arg(tmp.path().join("y.csv"))
        .output()
        .unwrap();
    let fit_bfr = field(&est.stdout, "training_bfr");
    let replay_bfr = field(&sim.stdout, "bfr");
    let round_trip =
        est.status.success() && sim.status.success() && fit_bfr.is_some() && fit_bfr == replay_bfr;
    outcome(
        reports_equal && round_trip,
        format!(
            "reports byte-identical: {reports_equal}; estimate BFR {} vs simulate BFR {}",
            fit_bfr.unwrap_or_default(),
            replay_bfr.unwrap_or_default()
        ),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let rep20 = monte_carlo(20.0);
    let rep10 = monte_carlo(10.0);
    let results = [
        ("1 Monte Carlo at 20 dB", table_20db(&rep20)),
        ("2 Monte Carlo at 10 dB", table_10db(&rep10)),
        ("3 coefficient functions", coefficient_tracking(&rep20)),
        ("4 primal-dual oracle", primal_dual()),
        ("5 2D filter recursion", filter_recursion()),
        ("6 barycenter", barycenter_properties()),
        ("7 kernel and Gram", gram_properties()),
        ("8 determinism", determinism()),
    ];
    let mut all = true;
    for (name, o) in &results {
        println!(
            "criterion {name}: {} ({})",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        all &= o.pass;
    }
    println!(
        "acceptance finished in {:.1} s",
        start.elapsed().as_secs_f64()
    );
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
