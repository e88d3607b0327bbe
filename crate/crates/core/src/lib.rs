//! Average-treatment-effect estimation from observational data.
//!
//! The crate provides the classical estimator family — outcome regression,
//! Hajek inverse-probability weighting, inverse-probability-weighted
//! regression adjustment (IPWRA), and augmented IPW (AIPW) — together with a
//! joint robust estimator (JRE) that trains both outcome models against a
//! bootstrap ensemble of propensity scores so that their biases cancel in the
//! final ATE, plus the Monte Carlo benchmark harness used to compare them.
//!
//! Everything is deterministic given explicit seeds: bootstrap worlds and
//! simulation replications derive their own seeds with a stable 64-bit mix,
//! so results do not depend on thread scheduling.

pub mod data;
pub mod error;
pub mod estimators;
pub mod jre;
pub mod propensity;
pub mod regression;
pub mod seeding;
pub mod simulation;

pub use data::{
    load_dataset, validate_dataset, write_dataset, CsvSchema, Dataset, Diagnostic,
    ValidationReport,
};
pub use error::{Error, Result};
pub use estimators::{
    ate_from_models, build_design, estimate_aipw, estimate_hajek, estimate_ipwra,
    estimate_ipwra_with, estimate_or, estimate_or_with, fit_outcome_models_or,
    fit_outcome_models_or_with, ATEEstimate, Arm, Diagnostics, EstimatorKind, EstimatorSet,
    FeatureSet, OutcomeModelPair,
};
pub use jre::{
    compute_bias_term, estimate_jre, estimate_jre_with, fit_jre, penalized_loss,
    penalized_loss_gradient, robust_loss, JreConfig, RobustLossTerms,
};
pub use propensity::{
    bootstrap_propensity_ensemble, clip_scores, fit_propensity, write_ensemble_csv,
    PropensityEnsemble, PropensityFit,
};
pub use regression::{
    fit_logistic, fit_weighted_least_squares, predict_linear, sigmoid, IrlsConfig,
    LinearCoefficients, LogisticCoefficients, LogisticFit,
};
pub use simulation::{
    generate_dataset, mse_reduction_percent, run_cell, run_monte_carlo, run_replication,
    run_replication_with, summarize_report, BenchmarkConfig, CellStats, DgpConfig,
    EstimatorStats, Provenance, ReplicationResult, ReportFormat, SimulatedDataset,
    SimulationReport, TRUE_TAU,
};

/// Crate version, recorded in run manifests and report provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
