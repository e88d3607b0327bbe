//! Acceptance suite.
//!
//! Three blocks, mirroring the project's exit criteria:
//!   1. exact identities between estimators (sub-second),
//!   2. large-sample oracle and consistency checks (minutes),
//!   3. the benchmark-scale grid with bracketed and directional targets.
//!
//! Each test prints one `PASS:` line with the measured numbers so a full run
//! doubles as a report.

use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use robust_ate::{
    ate_from_models, bootstrap_propensity_ensemble, estimate_aipw, estimate_hajek,
    estimate_ipwra, estimate_ipwra_with, estimate_jre, fit_outcome_models_or, fit_propensity,
    fit_weighted_least_squares, generate_dataset, penalized_loss, penalized_loss_gradient,
    run_monte_carlo, seeding, BenchmarkConfig, DgpConfig, EstimatorKind, EstimatorSet,
    FeatureSet, IrlsConfig, JreConfig, LinearCoefficients, OutcomeModelPair, RobustLossTerms,
    TRUE_TAU,
};

fn dgp(n: usize, t: f64, seed: u64) -> DgpConfig {
    DgpConfig { n, t, noise_sd: 1.0, seed }
}

fn random_scores(n: usize, seed: u64) -> Array1<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array1::from_iter((0..n).map(|_| 0.05 + 0.9 * rng.random::<f64>()))
}

// ---------------------------------------------------------------------------
// Exact-identity suite
// ---------------------------------------------------------------------------

#[test]
fn exact_identity_hajek_is_intercept_only_ipwra() {
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let n = 50 + (seed as usize % 4) * 50;
        let t = [0.0, 0.5, 1.0][seed as usize % 3];
        let sim = generate_dataset(&dgp(n, t, seed)).unwrap();
        let scores = random_scores(n, 10_000 + seed);
        let hajek = estimate_hajek(&sim.observed, scores.view()).unwrap();
        let (ipwra, _) =
            estimate_ipwra_with(&sim.observed, scores.view(), FeatureSet::InterceptOnly).unwrap();
        worst = worst.max((hajek.tau_hat - ipwra.tau_hat).abs());
    }
    assert!(worst <= 1e-10, "worst |delta tau| = {worst:e}");
    println!("PASS: hajek == intercept-only ipwra on 100 datasets, worst |delta| = {worst:.2e}");
}

#[test]
fn exact_identity_aipw_with_ipwra_models_matches_ipwra() {
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let sim = generate_dataset(&dgp(150 + (seed as usize % 3) * 100, 1.0, 200 + seed)).unwrap();
        let scores = random_scores(sim.observed.n(), 20_000 + seed);
        let (ipwra, models) = estimate_ipwra(&sim.observed, scores.view()).unwrap();
        let aipw = estimate_aipw(&sim.observed, scores.view(), &models).unwrap();
        worst = worst.max((aipw.tau_hat - ipwra.tau_hat).abs());
    }
    assert!(worst <= 1e-8, "worst |delta tau| = {worst:e}");
    println!("PASS: aipw(ipwra models) == ipwra on 20 datasets, worst |delta| = {worst:.2e}");
}

/// Balanced construction for the AIPW shift check: with scores fixed at the
/// empirical treatment share, the per-arm mean inverse weights are exactly 1
/// on both sides, which is the condition under which a common additive shift
/// cancels from the corrected estimate.
#[test]
fn exact_identity_common_shift_leaves_or_and_aipw_unchanged() {
    let mut worst_or = 0.0f64;
    let mut worst_aipw = 0.0f64;
    let mut worst_risk = 0.0f64;
    for seed in 0..20u64 {
        let sim = generate_dataset(&dgp(120, 1.0, 300 + seed)).unwrap();
        let d = &sim.observed;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift = 10.0 * rng.sample::<f64, _>(rand_distr::StandardNormal);

        let models = fit_outcome_models_or(d).unwrap();
        let mut shifted = models.clone();
        shifted.treated.intercept += shift;
        shifted.control.intercept += shift;

        // Outcome-regression estimate: any dataset, any shift.
        worst_or = worst_or.max((ate_from_models(d, &models) - ate_from_models(d, &shifted)).abs());

        // Empirical ATE risk against the known potential outcomes.
        let risk = |pair: &OutcomeModelPair| -> f64 {
            let (mu1, mu0) = pair.predict(d);
            let mut acc = 0.0;
            for i in 0..d.n() {
                let delta = (mu1[i] - sim.y1[i]) - (mu0[i] - sim.y0[i]);
                acc += delta * delta;
            }
            acc / d.n() as f64
        };
        worst_risk = worst_risk.max((risk(&models) - risk(&shifted)).abs());

        // AIPW with the balancing constant score.
        let share = d.n_treated() as f64 / d.n() as f64;
        let scores = Array1::from_elem(d.n(), share);
        let aipw = estimate_aipw(d, scores.view(), &models).unwrap();
        let aipw_shifted = estimate_aipw(d, scores.view(), &shifted).unwrap();
        worst_aipw = worst_aipw.max((aipw.tau_hat - aipw_shifted.tau_hat).abs());
    }
    assert!(worst_or <= 1e-10, "or shift drift {worst_or:e}");
    assert!(worst_aipw <= 1e-10, "aipw shift drift {worst_aipw:e}");
    assert!(worst_risk <= 1e-10, "risk shift drift {worst_risk:e}");
    println!(
        "PASS: common shift invariance, drift or={worst_or:.2e} aipw={worst_aipw:.2e} risk={worst_risk:.2e}"
    );
}

#[test]
fn exact_identity_wls_weighted_residuals_sum_to_zero() {
    let mut worst_ratio = 0.0f64;
    for seed in 0..30u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(400 + seed);
        let n = 40 + (seed as usize % 5) * 30;
        let p = 2 + seed as usize % 4;
        let mut design = Array2::ones((n, p));
        for i in 0..n {
            for j in 1..p {
                design[[i, j]] = rng.sample::<f64, _>(rand_distr::StandardNormal);
            }
        }
        let y = Array1::from_iter((0..n).map(|_| 3.0 * rng.sample::<f64, _>(rand_distr::StandardNormal)));
        let w = Array1::from_iter((0..n).map(|_| 0.05 + 2.0 * rng.random::<f64>()));
        let fit = fit_weighted_least_squares(design.view(), y.view(), w.view()).unwrap();
        let fitted = design.dot(&fit.to_full());
        let residual_sum: f64 = (0..n).map(|i| w[i] * (y[i] - fitted[i])).sum();
        let scale: f64 = (0..n).map(|i| w[i] * y[i].abs()).sum();
        worst_ratio = worst_ratio.max(residual_sum.abs() / scale.max(1e-300));
    }
    assert!(worst_ratio <= 1e-8, "worst scaled residual sum {worst_ratio:e}");
    println!("PASS: weighted-residual first-order condition, worst scaled sum = {worst_ratio:.2e}");
}

// ---------------------------------------------------------------------------
// Oracle / consistency suite
// ---------------------------------------------------------------------------

#[test]
fn oracle_logistic_fit_recovers_assignment_coefficients() {
    let sim = generate_dataset(&dgp(100_000, 0.0, 77)).unwrap();
    let fit = fit_propensity(&sim.observed, &IrlsConfig::default()).unwrap();
    assert!(fit.converged);
    let expected = [0.5, -0.5, 0.0, 0.0, 0.0];
    for (j, want) in expected.iter().enumerate() {
        let got = fit.coefficients.slopes[j];
        assert!(
            (got - want).abs() <= 0.05,
            "slope {j}: got {got}, want {want} +- 0.05"
        );
    }
    println!(
        "PASS: logistic recovery at N=1e5, slopes = {:?}",
        fit.coefficients.slopes
    );

    // At the centre of covariate space the score is sigmoid(intercept).
    let score_at_origin = robust_ate::sigmoid(fit.coefficients.intercept);
    assert!((score_at_origin - 0.5).abs() <= 0.02);
    println!("PASS: score at x=0 is {score_at_origin:.4} (within 0.02 of 0.5)");
}

#[test]
fn oracle_true_tau_is_two_for_every_t() {
    for (k, t) in [0.0, 0.5, 1.0].into_iter().enumerate() {
        let sim = generate_dataset(&dgp(1_000_000, t, 500 + k as u64)).unwrap();
        let mean_effect = (&sim.y1 - &sim.y0).mean().unwrap();
        assert!(
            (mean_effect - TRUE_TAU).abs() <= 0.01,
            "t={t}: mean effect {mean_effect}"
        );
        println!("PASS: t={t}, sample mean of y1-y0 at N=1e6 is {mean_effect:.5}");
    }
}

#[test]
fn oracle_hajek_with_true_scores_is_unbiased_at_t1() {
    let reps = 500usize;
    let mut taus = Vec::with_capacity(reps);
    for rep in 0..reps {
        let seed = seeding::replication_seed(7, 1000, 0, rep);
        let sim = generate_dataset(&dgp(1000, 1.0, seed)).unwrap();
        let est = estimate_hajek(&sim.observed, sim.true_scores.view()).unwrap();
        taus.push(est.tau_hat);
    }
    let r = reps as f64;
    let mean = taus.iter().sum::<f64>() / r;
    let var = taus.iter().map(|tau| (tau - mean).powi(2)).sum::<f64>() / (r - 1.0);
    let se = (var / r).sqrt();
    assert!(
        (mean - TRUE_TAU).abs() <= 3.0 * se,
        "mean {mean}, se {se}: off by {} se",
        (mean - TRUE_TAU).abs() / se
    );
    println!(
        "PASS: oracle-propensity hajek mean over 500 reps = {mean:.4} ({:+.2} MC SEs from 2)",
        (mean - TRUE_TAU) / se
    );
}

#[test]
fn oracle_jre_gradient_and_loss_dominance() {
    let sim = generate_dataset(&dgp(250, 1.0, 901)).unwrap();
    let d = &sim.observed;
    let irls = IrlsConfig::default();
    let ensemble = bootstrap_propensity_ensemble(d, 50, 31, &irls, 0.01).unwrap();
    let anchor_scores = ensemble.mean_scores();
    let (_, anchor) = estimate_ipwra_with(d, anchor_scores.view(), FeatureSet::Linear).unwrap();
    let terms = RobustLossTerms::build(d, &ensemble, FeatureSet::Linear).unwrap();
    let lambda = 0.02;
    let p = terms.width();

    let split = |v: &[f64]| -> (LinearCoefficients, LinearCoefficients) {
        (
            LinearCoefficients { intercept: v[0], slopes: v[1..p].to_vec() },
            LinearCoefficients { intercept: v[p], slopes: v[p + 1..].to_vec() },
        )
    };
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let mut worst_rel = 0.0f64;
    for _ in 0..5 {
        let point: Vec<f64> = (0..2 * p)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let (t1, t0) = split(&point);
        let grad = penalized_loss_gradient(&terms, &anchor, lambda, &t1, &t0);
        for k in 0..2 * p {
            let h = 1e-4 * (1.0 + point[k].abs());
            let mut plus = point.clone();
            plus[k] += h;
            let mut minus = point.clone();
            minus[k] -= h;
            let (p1, p0) = split(&plus);
            let (m1, m0) = split(&minus);
            let fd = (penalized_loss(&terms, &anchor, lambda, &p1, &p0)
                - penalized_loss(&terms, &anchor, lambda, &m1, &m0))
                / (2.0 * h);
            let denom = grad[k].abs().max(fd.abs()).max(1e-8);
            worst_rel = worst_rel.max(((grad[k] - fd) / denom).abs());
        }
    }
    assert!(worst_rel <= 1e-6, "worst relative gradient error {worst_rel:e}");
    println!("PASS: jre gradient vs central differences, worst rel err = {worst_rel:.2e}");

    // Loss dominance on every fitted run.
    for seed in 0..10u64 {
        let sim = generate_dataset(&dgp(200, 1.0, 950 + seed)).unwrap();
        let ensemble =
            bootstrap_propensity_ensemble(&sim.observed, 40, seed, &irls, 0.01).unwrap();
        let est = estimate_jre(&sim.observed, &ensemble, &JreConfig::default()).unwrap();
        let at_solution = est.diagnostics.robust_loss_solution.unwrap();
        let at_anchor = est.diagnostics.robust_loss_anchor.unwrap();
        assert!(
            at_solution <= at_anchor,
            "run {seed}: loss at solution {at_solution} > anchor {at_anchor}"
        );
    }
    println!("PASS: robust loss at solution <= anchor on 10 seeded runs");
}

#[test]
fn oracle_ensemble_mean_scores_agree_across_seeds() {
    // Two independent bootstrap ensembles over the same dataset: per-unit
    // mean scores agree within 3 cross-seed standard errors.
    let sim = generate_dataset(&dgp(200, 0.5, 1234)).unwrap();
    let irls = IrlsConfig::default();
    let b = 2000usize;
    let e1 = bootstrap_propensity_ensemble(&sim.observed, b, 111, &irls, 0.01).unwrap();
    let e2 = bootstrap_propensity_ensemble(&sim.observed, b, 222, &irls, 0.01).unwrap();
    let (m1, s1) = (e1.mean_scores(), e1.score_std());
    let (m2, s2) = (e2.mean_scores(), e2.score_std());
    let mut worst = 0.0f64;
    for i in 0..sim.observed.n() {
        let se = ((s1[i] * s1[i] + s2[i] * s2[i]) / b as f64).sqrt();
        assert!(s1[i] > 0.0, "unit {i} has zero across-world spread");
        let z = (m1[i] - m2[i]).abs() / se;
        worst = worst.max(z);
        assert!(z <= 3.0, "unit {i}: means {} vs {} differ by {z:.2} SEs", m1[i], m2[i]);
    }
    println!("PASS: cross-seed ensemble mean agreement at B=2000, worst z = {worst:.2}");
}

// ---------------------------------------------------------------------------
// Benchmark-scale suite
// ---------------------------------------------------------------------------

fn benchmark(n_values: Vec<usize>, t_values: Vec<f64>, reps: usize, b_count: usize) -> BenchmarkConfig {
    let estimators: EstimatorSet = [EstimatorKind::Ipwra, EstimatorKind::Jre].into_iter().collect();
    BenchmarkConfig {
        n_values,
        t_values,
        reps,
        b_count,
        noise_sd: 1.0,
        base_seed: 42,
        estimators,
        features: FeatureSet::Linear,
    }
}

#[test]
fn benchmark_smoke_grid_finishes_quickly() {
    let start = std::time::Instant::now();
    let config = benchmark(vec![100, 300, 500, 1000], vec![0.0, 0.5, 1.0], 20, 100);
    let report = run_monte_carlo(&config, &JreConfig::default()).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    assert_eq!(report.cells.len(), 12);
    for cell in &report.cells {
        for stats in cell.stats.values() {
            assert_eq!(stats.failures, 0);
            assert!((stats.mse - (stats.bias_sq + stats.variance)).abs() <= 1e-10);
        }
    }
    assert!(elapsed <= 300.0, "smoke grid took {elapsed:.0}s (budget 300s)");
    println!("PASS: smoke grid (R=20, B=100, 12 cells) in {elapsed:.0}s");
}

#[test]
fn benchmark_t0_n1000_ipwra_bracket_and_jre_parity() {
    let config = benchmark(vec![1000], vec![0.0], 200, 1000);
    let report = run_monte_carlo(&config, &JreConfig::default()).unwrap();
    let cell = &report.cells[0];
    let ipwra = cell.stats[&EstimatorKind::Ipwra].mse;
    let jre = cell.stats[&EstimatorKind::Jre].mse;
    assert!(
        (0.002..=0.009).contains(&ipwra),
        "ipwra mse {ipwra} outside [0.002, 0.009]"
    );
    let rel = (jre - ipwra).abs() / ipwra;
    assert!(rel <= 0.05, "jre deviates {:.2}% from ipwra at t=0", rel * 100.0);
    println!(
        "PASS: t=0 N=1000: ipwra mse {ipwra:.4} in [0.002, 0.009], |jre-ipwra|/ipwra = {:.2}%",
        rel * 100.0
    );
}

#[test]
fn benchmark_t1_n1000_jre_reduces_mse() {
    let config = benchmark(vec![1000], vec![1.0], 200, 1000);
    let report = run_monte_carlo(&config, &JreConfig::default()).unwrap();
    let cell = &report.cells[0];
    let ipwra = cell.stats[&EstimatorKind::Ipwra].mse;
    let jre = cell.stats[&EstimatorKind::Jre].mse;
    assert!(jre <= ipwra, "jre mse {jre} exceeds ipwra {ipwra}");
    let reduction = cell.reduction_jre_vs_ipwra.unwrap();
    assert!(
        (3.0..=25.0).contains(&reduction),
        "reduction {reduction:.2}% outside [3%, 25%]"
    );
    println!(
        "PASS: t=1 N=1000: ipwra mse {ipwra:.4}, jre mse {jre:.4}, reduction {reduction:.2}%"
    );
}

#[test]
fn benchmark_mid_cells_jre_dominates_in_most() {
    let config = benchmark(vec![300, 500], vec![0.5, 1.0], 200, 1000);
    let report = run_monte_carlo(&config, &JreConfig::default()).unwrap();
    assert_eq!(report.cells.len(), 4);
    let mut wins = 0;
    let mut lines = Vec::new();
    for cell in &report.cells {
        let ipwra = cell.stats[&EstimatorKind::Ipwra].mse;
        let jre = cell.stats[&EstimatorKind::Jre].mse;
        if jre <= ipwra {
            wins += 1;
        }
        lines.push(format!(
            "  n={} t={}: ipwra {ipwra:.4}, jre {jre:.4}, reduction {:+.2}%",
            cell.n,
            cell.t,
            cell.reduction_jre_vs_ipwra.unwrap()
        ));
    }
    assert!(wins >= 3, "jre beat ipwra in only {wins} of 4 mid-size cells");
    println!("PASS: jre at or below ipwra in {wins}/4 mid-size cells");
    for line in lines {
        println!("{line}");
    }
}
