//! Scratch calibration run (temporary; not part of the deliverable).

use robust_ate::*;

fn main() {
    let jre = JreConfig::default();
    let estimators: EstimatorSet = [EstimatorKind::Ipwra, EstimatorKind::Jre].into_iter().collect();

    let t0 = std::time::Instant::now();
    for (n_values, t_values) in [
        (vec![1000], vec![0.0, 1.0]),
        (vec![300, 500], vec![0.5, 1.0]),
    ] {
        let config = BenchmarkConfig {
            n_values,
            t_values,
            reps: 200,
            b_count: 1000,
            noise_sd: 1.0,
            base_seed: 42,
            estimators: estimators.clone(),
            features: FeatureSet::Linear,
        };
        let report = run_monte_carlo(&config, &jre).unwrap();
        print!("{}", summarize_report(&report, ReportFormat::Markdown));
        println!("elapsed: {:.1}s", t0.elapsed().as_secs_f64());
    }
}
