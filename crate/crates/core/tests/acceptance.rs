//! End-to-end acceptance checks. Runs as a plain binary (`harness = false`)
//! and prints one PASS/FAIL line per criterion.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;

use tomo_core::estimators::{least_squares, noise_level, operator_norm, physical_threshold, threshold_spectrum};
use tomo_core::experiments::{aggregate, find_row, run_experiment, Estimator, ExperimentConfig, PrescribedSpectrum, SummaryRow};
use tomo_core::fisher_bounds::{fisher_check, minimax_bound, MixedDiagonalCoupling};
use tomo_core::linalg::{frobenius_error, hermitian_eigen, CMatrix, HermitianEstimate};
use tomo_core::pauli_model::{
    forward_map, pauli_coefficient, reconstruct_from_probabilities, state_to_pauli_coeffs, MeasurementDesign, PauliLabel,
};
use tomo_core::sampler::simulate_dataset;
use tomo_core::seed::rng_from;
use tomo_core::state_gen::{random_rank_r_state, StateSpec};

const RANK_SIX_SPECTRUM: [f64; 6] = [0.47, 0.19, 0.12, 0.11, 0.07, 0.04];

struct Outcome {
    pass: bool,
    detail: String,
}

fn within(limit_secs: u64, start: Instant) -> (bool, Duration) {
    let elapsed = start.elapsed();
    (elapsed < Duration::from_secs(limit_secs), elapsed)
}

fn exact_inversion() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for i in 0..50u64 {
        let k = 1 + (i as usize % 4);
        let d = 1 << k;
        let r = 1 + (i as usize * 7) % d;
        let rho = random_rank_r_state(&StateSpec::new(d, r, 1000 + i)).unwrap();
        let p = forward_map(&state_to_pauli_coeffs(rho.matrix()).unwrap());
        let back = reconstruct_from_probabilities(&p);
        worst = worst.max(frobenius_error(back.matrix(), rho.matrix()).unwrap().sqrt());
    }
    let (fast, t) = within(30, start);
    Outcome {
        pass: worst < 1e-10 && fast,
        detail: format!("max Frobenius error {worst:.2e} over 50 states, {:.2?}", t),
    }
}

fn gram_identity() -> Outcome {
    let start = Instant::now();
    let mut mismatches = 0usize;
    for k in 1..=3 {
        let design = MeasurementDesign::new(k).unwrap();
        let outcomes = design.outcomes();
        let labels: Vec<PauliLabel> = (0..1usize << (2 * k)).map(|i| PauliLabel::from_index(i, k).unwrap()).collect();
        let table: Vec<Vec<i64>> = labels
            .iter()
            .map(|b| {
                design
                    .settings()
                    .iter()
                    .flat_map(|s| outcomes.iter().map(move |o| (s, o)))
                    .map(|(s, o)| pauli_coefficient(b, o, s).unwrap() as i64)
                    .collect()
            })
            .collect();
        for (a, ra) in table.iter().enumerate() {
            for (b, rb) in table.iter().enumerate() {
                let g: i64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
                let expected = if a == b {
                    (1i64 << k) * 3i64.pow(labels[a].identity_count() as u32)
                } else {
                    0
                };
                mismatches += usize::from(g != expected);
            }
        }
    }
    let (fast, t) = within(10, start);
    Outcome {
        pass: mismatches == 0 && fast,
        detail: format!("{mismatches} mismatching Gram entries for k <= 3, {:.2?}", t),
    }
}

fn concentration() -> Outcome {
    let start = Instant::now();
    let rho = random_rank_r_state(&StateSpec::new(8, 2, 303)).unwrap();
    let nu = noise_level(3, 200, 0.1).unwrap().nu;
    let exceed = (0..200u64)
        .filter(|&rep| {
            let ls = least_squares(&simulate_dataset(&rho, 200, 5000 + rep).unwrap());
            operator_norm(&(ls.matrix() - rho.matrix())).unwrap() > nu
        })
        .count();
    let fraction = exceed as f64 / 200.0;
    let (fast, t) = within(120, start);
    Outcome {
        pass: fraction <= 0.15 && fast,
        detail: format!("fraction with ||LS - rho|| > nu = {fraction:.3} (nu = {nu:.4}), {:.2?}", t),
    }
}

fn mean(summary: &[SummaryRow], rank: usize, n: u64, e: Estimator) -> f64 {
    find_row(summary, rank, n, e).unwrap().mean_sq_error
}

fn rank_two_summary() -> (Vec<SummaryRow>, Duration) {
    let start = Instant::now();
    let config = ExperimentConfig {
        ranks: vec![2],
        n: vec![100],
        replicates: 50,
        seed: 4,
        ..ExperimentConfig::full()
    };
    let summary = aggregate(&run_experiment(&config).unwrap()).unwrap();
    (summary, start.elapsed())
}

/// The estimators compared in the published error figures.
const FIGURE_ESTIMATORS: [Estimator; 3] = [Estimator::PenalisedCv, Estimator::PhysicalCv, Estimator::CvRank];

fn ratio_list(summary: &[SummaryRow], ls: f64, estimators: &[Estimator]) -> Vec<(Estimator, f64)> {
    estimators.iter().map(|&e| (e, mean(summary, 2, 100, e) / ls)).collect()
}

fn estimator_ordering(summary: &[SummaryRow], elapsed: Duration) -> Outcome {
    let ls = mean(summary, 2, 100, Estimator::LeastSquares);
    let ratios = ratio_list(summary, ls, &FIGURE_ESTIMATORS);
    let untuned = ratio_list(summary, ls, &[Estimator::Penalised, Estimator::Physical]);
    let show = |v: &[(Estimator, f64)]| v.iter().map(|(e, r)| format!("{e} {r:.3}")).collect::<Vec<_>>().join(", ");
    Outcome {
        pass: ratios.iter().all(|(_, r)| *r < 0.5) && elapsed < Duration::from_secs(300),
        detail: format!(
            "mean SE / mean SE(ls = {ls:.4}): {} [untuned constants: {}], {:.2?}",
            show(&ratios),
            show(&untuned),
            elapsed
        ),
    }
}

fn rank_recovery() -> Outcome {
    let start = Instant::now();
    let config = ExperimentConfig {
        ranks: vec![6],
        n: vec![2500],
        replicates: 50,
        seed: 6,
        spectra: vec![PrescribedSpectrum { rank: 6, eigenvalues: RANK_SIX_SPECTRUM.to_vec() }],
        ..ExperimentConfig::full()
    };
    let summary = aggregate(&run_experiment(&config).unwrap()).unwrap();
    let hit = |e| {
        let row = find_row(&summary, 6, 2500, e).unwrap();
        *row.rank_histogram.get(&6).unwrap_or(&0) as f64 / row.replicates as f64
    };
    let (pen, phys) = (hit(Estimator::PenalisedCv), hit(Estimator::PhysicalCv));
    let (fast, t) = within(900, start);
    Outcome {
        pass: pen >= 0.7 && phys >= 0.7 && fast,
        detail: format!("rank 6 selected: pen-cv {pen:.2}, phys-cv {phys:.2}, {:.2?}", t),
    }
}

fn renormalised_trend() -> Outcome {
    let start = Instant::now();
    let ns = [100u64, 500, 2500];
    let ranks = [1usize, 2, 6];
    let config = ExperimentConfig {
        ranks: ranks.to_vec(),
        n: ns.to_vec(),
        replicates: 25,
        seed: 8,
        ..ExperimentConfig::full()
    };
    let summary = aggregate(&run_experiment(&config).unwrap()).unwrap();
    let renorm = |r, n| find_row(&summary, r, n, Estimator::PhysicalCv).unwrap().renormalised_mse;
    let mut pass = true;
    let mut parts = Vec::new();
    for r in ranks {
        let values: Vec<f64> = ns.iter().map(|&n| renorm(r, n)).collect();
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(0.0, f64::max);
        pass &= hi / lo < 2.0;
        parts.push(format!(
            "rank {r}: {} (max/min {:.2})",
            values.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join("/"),
            hi / lo
        ));
    }
    let at_top: Vec<f64> = ranks.iter().map(|&r| renorm(r, 2500)).collect();
    let monotone = at_top.windows(2).all(|w| w[0] < w[1]);
    Outcome {
        pass: pass && monotone,
        detail: format!(
            "n*meanSE(phys-cv) {}; increasing in rank at n=2500: {monotone}, {:.2?}",
            parts.join("; "),
            start.elapsed()
        ),
    }
}

fn fisher_closed_forms() -> Outcome {
    let start = Instant::now();
    let report = fisher_check(4, 2, 20_000, 7, MixedDiagonalCoupling::Derived).unwrap();
    let (fast, t) = within(300, start);
    let worst_rel = report
        .blocks
        .iter()
        .filter_map(|b| b.max_relative_deviation)
        .fold(0.0f64, f64::max);
    let cross_z = report
        .blocks
        .iter()
        .filter(|b| b.block.chars().next() != b.block.chars().nth(1))
        .filter_map(|b| b.max_zero_z)
        .fold(0.0f64, f64::max);
    let cross_ok = cross_z < 3.0;
    let coupling: Vec<String> = report
        .mixed_coupling
        .iter()
        .map(|c| format!("{:?} {:.3} dev {:.3}", c.convention, c.value, c.max_relative_deviation))
        .collect();
    Outcome {
        pass: worst_rel <= 0.10 && cross_ok && fast,
        detail: format!(
            "max rel dev {worst_rel:.3}, max cross |mean|/se {cross_z:.2}; mixed dd coupling: {}, {:.2?}",
            coupling.join(", "),
            t
        ),
    }
}

fn minimax(summary: &[SummaryRow]) -> Outcome {
    let bound = minimax_bound(16, 2).unwrap();
    let total = 100.0 * 81.0;
    let (best, mse) = FIGURE_ESTIMATORS
        .into_iter()
        .map(|e| (e, mean(summary, 2, 100, e)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let scaled = total * mse;
    let ratio = scaled / bound;
    Outcome {
        pass: bound == 56.0 && (1.0 / 20.0..=20.0).contains(&ratio),
        detail: format!("bound {bound}; N*meanSE({best}) = {scaled:.2}, ratio {ratio:.2}"),
    }
}

fn random_trace_one(d: usize, rng: &mut impl Rng) -> HermitianEstimate {
    let mut m = CMatrix::from_fn(d, d, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    m = (&m + m.adjoint()).scale(0.5);
    let shift = (1.0 - m.trace().re) / d as f64;
    m += CMatrix::identity(d, d).scale(shift);
    HermitianEstimate::new(m).unwrap()
}

fn physical_validity() -> Outcome {
    let mut rng = rng_from(99, &[]);
    let mut failures = 0usize;
    for _ in 0..1000 {
        let d = 1 << rng.random_range(1..=4);
        let m = random_trace_one(d, &mut rng);
        let nu = rng.random_range(0.0..0.2);
        let est = physical_threshold(&m, nu).unwrap();
        let (values, _) = hermitian_eigen(est.state.matrix()).unwrap();
        let trace = est.state.as_estimate().trace();
        let positive: Vec<f64> = values.iter().copied().filter(|&v| v > 1e-10).collect();
        let psd = values.iter().all(|&v| v >= -1e-10);
        let gap = est.rank == 1 || positive.iter().all(|&v| v > 4.0 * nu);
        failures += usize::from(!(psd && (trace - 1.0).abs() <= 1e-12 && gap && positive.len() == est.rank));
    }
    // hand-executed spectra
    let (a, ra) = threshold_spectrum(&[0.6, 0.3, 0.2, -0.1], 0.15);
    let (b, rb) = threshold_spectrum(&[0.9, 0.2, 0.0, -0.1], 0.12);
    let (c, rc) = threshold_spectrum(&[0.4, 0.35, 0.25], 0.1);
    let close = |x: &[f64], y: &[f64]| x.iter().zip(y).all(|(p, q)| (p - q).abs() < 1e-12);
    let hand = ra == 3
        && close(&a, &[0.6 - 0.1 / 3.0, 0.3 - 0.1 / 3.0, 0.2 - 0.1 / 3.0, 0.0])
        && rb == 2
        && close(&b, &[0.85, 0.15, 0.0, 0.0])
        && rc == 3
        && close(&c, &[0.4, 0.35, 0.25]);
    let diag = HermitianEstimate::new(CMatrix::from_diagonal(&DVector::from_vec(
        [0.6, 0.3, 0.2, -0.1].map(|v| Complex64::new(v, 0.0)).to_vec(),
    )))
    .unwrap();
    let est = physical_threshold(&diag, 0.15 / 4.0).unwrap();
    let example = est.rank == 3 && close(&est.eigenvalues, &[0.6 - 0.1 / 3.0, 0.3 - 0.1 / 3.0, 0.2 - 0.1 / 3.0, 0.0]);
    Outcome {
        pass: failures == 0 && hand && example,
        detail: format!("{failures} invalid outputs out of 1000; hand examples reproduced: {}", hand && example),
    }
}

fn main() -> ExitCode {
    let mut results: Vec<(&str, Outcome)> = vec![
        ("1 exact inversion", exact_inversion()),
        ("2 Gram identity", gram_identity()),
        ("3 concentration", concentration()),
    ];
    let (summary, elapsed) = rank_two_summary();
    results.push(("4 estimator ordering", estimator_ordering(&summary, elapsed)));
    results.push(("5 rank recovery", rank_recovery()));
    results.push(("6 renormalised MSE trend", renormalised_trend()));
    results.push(("7 Fisher closed forms", fisher_closed_forms()));
    results.push(("8 minimax bound", minimax(&summary)));
    results.push(("9 physical validity", physical_validity()));

    let mut failed = 0;
    for (name, outcome) in &results {
        let tag = if outcome.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!outcome.pass);
        println!("criterion {name}: {tag} | {}", outcome.detail);
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
