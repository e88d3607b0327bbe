//! The classical ATE estimator family: outcome regression, Hajek IPW,
//! IPWRA, and AIPW.
//!
//! All estimators are pure and deterministic. Propensity scores are consumed
//! exactly as given — clipping is the caller's responsibility — which keeps
//! every formula checkable against hand arithmetic.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::jre::bias_term_for_predictions;
use crate::regression::{fit_weighted_least_squares, LinearCoefficients};

/// Outcome-model feature map. The benchmark default is an intercept plus the
/// raw covariates; the other variants exist as diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureSet {
    InterceptOnly,
    Linear,
    LinearSquares,
}

impl FeatureSet {
    pub fn name(&self) -> &'static str {
        match self {
            FeatureSet::InterceptOnly => "intercept-only",
            FeatureSet::Linear => "linear",
            FeatureSet::LinearSquares => "linear-squares",
        }
    }

    /// Number of design columns for `d` raw covariates, intercept included.
    pub fn width(&self, d: usize) -> usize {
        match self {
            FeatureSet::InterceptOnly => 1,
            FeatureSet::Linear => 1 + d,
            FeatureSet::LinearSquares => 1 + 2 * d,
        }
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "intercept-only" | "intercept_only" | "intercept" => Ok(FeatureSet::InterceptOnly),
            "linear" => Ok(FeatureSet::Linear),
            "linear-squares" | "linear_squares" | "squares" => Ok(FeatureSet::LinearSquares),
            other => Err(Error::InvalidArgument(format!(
                "unknown feature set '{other}' (expected intercept-only, linear, or linear-squares)"
            ))),
        }
    }
}

/// Build a design matrix with a leading all-ones column. This is the single
/// place designs are constructed; regression kernels never add the intercept.
pub fn build_design(covariates: ArrayView2<f64>, features: FeatureSet) -> Array2<f64> {
    let n = covariates.nrows();
    let d = covariates.ncols();
    let mut design = Array2::ones((n, features.width(d)));
    match features {
        FeatureSet::InterceptOnly => {}
        FeatureSet::Linear => {
            design.slice_mut(ndarray::s![.., 1..]).assign(&covariates);
        }
        FeatureSet::LinearSquares => {
            design.slice_mut(ndarray::s![.., 1..=d]).assign(&covariates);
            for i in 0..n {
                for j in 0..d {
                    design[[i, 1 + d + j]] = covariates[[i, j]] * covariates[[i, j]];
                }
            }
        }
    }
    design
}

/// One treatment arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    Treated,
    Control,
}

/// Fitted outcome models for both arms, sharing one feature map.
#[derive(Debug, Clone, Serialize)]
pub struct OutcomeModelPair {
    pub treated: LinearCoefficients,
    pub control: LinearCoefficients,
    pub features: FeatureSet,
}

impl OutcomeModelPair {
    /// Per-row predictions of both models over the whole dataset.
    pub fn predict(&self, d: &Dataset) -> (Array1<f64>, Array1<f64>) {
        let design = build_design(d.covariates(), self.features);
        let mu1 = design.dot(&self.treated.to_full());
        let mu0 = design.dot(&self.control.to_full());
        (mu1, mu0)
    }
}

/// Estimator names used across results, reports, and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Or,
    Hajek,
    Ipwra,
    Aipw,
    Jre,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 5] = [
        EstimatorKind::Or,
        EstimatorKind::Hajek,
        EstimatorKind::Ipwra,
        EstimatorKind::Aipw,
        EstimatorKind::Jre,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Or => "or",
            EstimatorKind::Hajek => "hajek",
            EstimatorKind::Ipwra => "ipwra",
            EstimatorKind::Aipw => "aipw",
            EstimatorKind::Jre => "jre",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "or" => Ok(EstimatorKind::Or),
            "hajek" => Ok(EstimatorKind::Hajek),
            "ipwra" => Ok(EstimatorKind::Ipwra),
            "aipw" => Ok(EstimatorKind::Aipw),
            "jre" => Ok(EstimatorKind::Jre),
            other => Err(Error::InvalidArgument(format!(
                "unknown estimator '{other}' (expected or, hajek, ipwra, aipw, jre)"
            ))),
        }
    }
}

/// Set of estimators requested for a run.
pub type EstimatorSet = BTreeSet<EstimatorKind>;

/// Per-estimate diagnostics carried alongside the point estimate.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Diagnostics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feature_set: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub robust_loss_anchor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub robust_loss_solution: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

/// One ATE point estimate with its bias-term diagnostics.
///
/// `bias_treated` / `bias_control` are the empirical weighted-residual means
/// with full-sample (1/N) normalization; for estimators fitted with a free
/// intercept under the same weights they vanish by the first-order condition.
#[derive(Debug, Clone, Serialize)]
pub struct ATEEstimate {
    pub estimator: EstimatorKind,
    pub tau_hat: f64,
    pub bias_treated: f64,
    pub bias_control: f64,
    pub diagnostics: Diagnostics,
}

impl ATEEstimate {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("estimate serializes")
    }
}

fn check_arms(d: &Dataset) -> Result<()> {
    if d.n_treated() == 0 || d.n_control() == 0 {
        return Err(Error::SingleClass);
    }
    Ok(())
}

fn check_scores(d: &Dataset, scores: ArrayView1<f64>) -> Result<()> {
    if scores.len() != d.n() {
        return Err(Error::DimensionMismatch {
            expected: d.n(),
            found: scores.len(),
        });
    }
    if let Some(s) = scores.iter().find(|s| !(**s > 0.0 && **s < 1.0)) {
        return Err(Error::InvalidArgument(format!(
            "propensity scores must lie strictly in (0, 1), found {s}"
        )));
    }
    Ok(())
}

fn check_finite(estimator: EstimatorKind, tau_hat: f64) -> Result<()> {
    if tau_hat.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteEstimate {
            estimator: estimator.name().into(),
        })
    }
}

/// Inverse-probability weight of row `i` within its own arm.
fn arm_weight(z: u8, score: f64) -> f64 {
    if z == 1 {
        1.0 / score
    } else {
        1.0 / (1.0 - score)
    }
}

fn weight_extremes(d: &Dataset, scores: ArrayView1<f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (&z, &s) in d.treatment().iter().zip(scores.iter()) {
        let w = arm_weight(z, s);
        lo = lo.min(w);
        hi = hi.max(w);
    }
    (lo, hi)
}

/// Fit one arm's outcome model by weighted least squares on that arm's rows.
fn fit_arm_model(
    d: &Dataset,
    arm: Arm,
    weights_full: Option<ArrayView1<f64>>,
    features: FeatureSet,
) -> Result<LinearCoefficients> {
    let idx = d.arm_indices(arm == Arm::Treated);
    if idx.is_empty() {
        return Err(Error::SingleClass);
    }
    let design_full = build_design(d.covariates(), features);
    let p = design_full.ncols();
    let mut design = Array2::zeros((idx.len(), p));
    let mut y = Array1::zeros(idx.len());
    let mut w = Array1::ones(idx.len());
    for (row, &i) in idx.iter().enumerate() {
        design.row_mut(row).assign(&design_full.row(i));
        y[row] = d.outcome()[i];
        if let Some(full) = weights_full {
            w[row] = full[i];
        }
    }
    fit_weighted_least_squares(design.view(), y.view(), w.view())
}

/// Per-arm ordinary least squares on the default linear features.
pub fn fit_outcome_models_or(d: &Dataset) -> Result<OutcomeModelPair> {
    fit_outcome_models_or_with(d, FeatureSet::Linear)
}

pub fn fit_outcome_models_or_with(d: &Dataset, features: FeatureSet) -> Result<OutcomeModelPair> {
    check_arms(d)?;
    Ok(OutcomeModelPair {
        treated: fit_arm_model(d, Arm::Treated, None, features)?,
        control: fit_arm_model(d, Arm::Control, None, features)?,
        features,
    })
}

/// Full-sample mean difference of the two models' predictions.
pub fn ate_from_models(d: &Dataset, models: &OutcomeModelPair) -> f64 {
    let (mu1, mu0) = models.predict(d);
    (mu1 - mu0).mean().expect("dataset is non-empty")
}

/// Unweighted per-arm residual mean with 1/N normalization (the outcome
/// regression analogue of the weighted bias terms).
fn unweighted_bias(d: &Dataset, arm: Arm, predictions: ArrayView1<f64>) -> f64 {
    let want = u8::from(arm == Arm::Treated);
    let n = d.n() as f64;
    d.treatment()
        .iter()
        .zip(d.outcome().iter().zip(predictions.iter()))
        .filter(|(&z, _)| z == want)
        .map(|(_, (&y, &mu))| y - mu)
        .sum::<f64>()
        / n
}

/// Outcome regression: per-arm OLS applied to the entire sample.
pub fn estimate_or(d: &Dataset) -> Result<ATEEstimate> {
    estimate_or_with(d, FeatureSet::Linear)
}

pub fn estimate_or_with(d: &Dataset, features: FeatureSet) -> Result<ATEEstimate> {
    let models = fit_outcome_models_or_with(d, features)?;
    let (mu1, mu0) = models.predict(d);
    let tau_hat = (&mu1 - &mu0).mean().expect("non-empty");
    check_finite(EstimatorKind::Or, tau_hat)?;
    Ok(ATEEstimate {
        estimator: EstimatorKind::Or,
        tau_hat,
        bias_treated: unweighted_bias(d, Arm::Treated, mu1.view()),
        bias_control: unweighted_bias(d, Arm::Control, mu0.view()),
        diagnostics: Diagnostics {
            feature_set: Some(features.name().into()),
            ..Diagnostics::default()
        },
    })
}

/// Hajek estimator: self-normalized inverse-probability-weighted mean
/// difference. Identical to IPWRA restricted to intercept-only models.
pub fn estimate_hajek(d: &Dataset, scores: ArrayView1<f64>) -> Result<ATEEstimate> {
    check_arms(d)?;
    check_scores(d, scores)?;

    let mut num = [0.0f64; 2];
    let mut den = [0.0f64; 2];
    for ((&z, &s), &y) in d.treatment().iter().zip(scores.iter()).zip(d.outcome().iter()) {
        let w = arm_weight(z, s);
        let arm = usize::from(z);
        num[arm] += w * y;
        den[arm] += w;
    }
    let beta1 = num[1] / den[1];
    let beta0 = num[0] / den[0];
    let tau_hat = beta1 - beta0;
    check_finite(EstimatorKind::Hajek, tau_hat)?;

    let mu1 = Array1::from_elem(d.n(), beta1);
    let mu0 = Array1::from_elem(d.n(), beta0);
    let (weight_min, weight_max) = weight_extremes(d, scores);
    Ok(ATEEstimate {
        estimator: EstimatorKind::Hajek,
        tau_hat,
        bias_treated: bias_term_for_predictions(d, Arm::Treated, scores, mu1.view()),
        bias_control: bias_term_for_predictions(d, Arm::Control, scores, mu0.view()),
        diagnostics: Diagnostics {
            weight_min: Some(weight_min),
            weight_max: Some(weight_max),
            ..Diagnostics::default()
        },
    })
}

/// IPWRA: outcome models fitted by inverse-propensity-weighted least squares
/// with a free intercept; the ATE is the full-sample mean model difference.
pub fn estimate_ipwra(d: &Dataset, scores: ArrayView1<f64>) -> Result<(ATEEstimate, OutcomeModelPair)> {
    estimate_ipwra_with(d, scores, FeatureSet::Linear)
}

pub fn estimate_ipwra_with(
    d: &Dataset,
    scores: ArrayView1<f64>,
    features: FeatureSet,
) -> Result<(ATEEstimate, OutcomeModelPair)> {
    check_arms(d)?;
    check_scores(d, scores)?;

    let weights = Array1::from_iter(
        d.treatment()
            .iter()
            .zip(scores.iter())
            .map(|(&z, &s)| arm_weight(z, s)),
    );
    let models = OutcomeModelPair {
        treated: fit_arm_model(d, Arm::Treated, Some(weights.view()), features)?,
        control: fit_arm_model(d, Arm::Control, Some(weights.view()), features)?,
        features,
    };
    let (mu1, mu0) = models.predict(d);
    let tau_hat = (&mu1 - &mu0).mean().expect("non-empty");
    check_finite(EstimatorKind::Ipwra, tau_hat)?;

    let (weight_min, weight_max) = weight_extremes(d, scores);
    let estimate = ATEEstimate {
        estimator: EstimatorKind::Ipwra,
        tau_hat,
        bias_treated: bias_term_for_predictions(d, Arm::Treated, scores, mu1.view()),
        bias_control: bias_term_for_predictions(d, Arm::Control, scores, mu0.view()),
        diagnostics: Diagnostics {
            weight_min: Some(weight_min),
            weight_max: Some(weight_max),
            feature_set: Some(features.name().into()),
            ..Diagnostics::default()
        },
    };
    Ok((estimate, models))
}

/// AIPW: model predictions corrected by the inverse-weighted residual means.
///
/// `tau_hat = [mean(mu1) + B1] - [mean(mu0) + B0]` where `B1`, `B0` are the
/// weighted bias terms, which double as the returned diagnostics.
pub fn estimate_aipw(
    d: &Dataset,
    scores: ArrayView1<f64>,
    models: &OutcomeModelPair,
) -> Result<ATEEstimate> {
    check_arms(d)?;
    check_scores(d, scores)?;
    if !(models.treated.is_finite() && models.control.is_finite()) {
        return Err(Error::InvalidArgument("outcome models must be finite".into()));
    }

    let (mu1, mu0) = models.predict(d);
    let bias_treated = bias_term_for_predictions(d, Arm::Treated, scores, mu1.view());
    let bias_control = bias_term_for_predictions(d, Arm::Control, scores, mu0.view());
    let mu1_dr = mu1.mean().expect("non-empty") + bias_treated;
    let mu0_dr = mu0.mean().expect("non-empty") + bias_control;
    let tau_hat = mu1_dr - mu0_dr;
    check_finite(EstimatorKind::Aipw, tau_hat)?;

    let (weight_min, weight_max) = weight_extremes(d, scores);
    Ok(ATEEstimate {
        estimator: EstimatorKind::Aipw,
        tau_hat,
        bias_treated,
        bias_control,
        diagnostics: Diagnostics {
            weight_min: Some(weight_min),
            weight_max: Some(weight_max),
            feature_set: Some(models.features.name().into()),
            ..Diagnostics::default()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn linear_dataset(n: usize, effect: f64, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Array2::zeros((n, 2));
        let mut z = Vec::with_capacity(n);
        let mut y = Array1::zeros(n);
        for i in 0..n {
            x[[i, 0]] = rng.sample::<f64, _>(rand_distr::StandardNormal);
            x[[i, 1]] = rng.sample::<f64, _>(rand_distr::StandardNormal);
            let zi = u8::from(rng.random::<f64>() < 0.5);
            z.push(zi);
            y[i] = effect * f64::from(zi) + x[[i, 0]] - 0.5 * x[[i, 1]];
        }
        Dataset::new(x, z, y).unwrap()
    }

    #[test]
    fn or_recovers_noiseless_linear_effect_exactly() {
        let d = linear_dataset(200, 2.0, 1);
        let est = estimate_or(&d).unwrap();
        assert_abs_diff_eq!(est.tau_hat, 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(est.bias_treated, 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(est.bias_control, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn or_constant_treated_outcomes_give_constant_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 50;
        let mut x = Array2::zeros((n, 2));
        let mut z = Vec::new();
        let mut y = Array1::zeros(n);
        for i in 0..n {
            x[[i, 0]] = rng.sample::<f64, _>(rand_distr::StandardNormal);
            x[[i, 1]] = rng.sample::<f64, _>(rand_distr::StandardNormal);
            let zi = u8::from(i % 2 == 0);
            z.push(zi);
            y[i] = if zi == 1 { 7.5 } else { x[[i, 0]] };
        }
        let d = Dataset::new(x, z, y).unwrap();
        let models = fit_outcome_models_or(&d).unwrap();
        assert_abs_diff_eq!(models.treated.intercept, 7.5, epsilon = 1e-10);
        for s in &models.treated.slopes {
            assert_abs_diff_eq!(*s, 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn or_identical_models_give_zero_tau() {
        let d = linear_dataset(100, 0.0, 3);
        let models = fit_outcome_models_or(&d).unwrap();
        let pair = OutcomeModelPair {
            treated: models.control.clone(),
            control: models.control.clone(),
            features: models.features,
        };
        assert_abs_diff_eq!(ate_from_models(&d, &pair), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn hajek_uniform_scores_reduce_to_mean_difference() {
        let d = linear_dataset(150, 1.0, 4);
        let scores = Array1::from_elem(d.n(), 0.5);
        let est = estimate_hajek(&d, scores.view()).unwrap();

        let t_mean = d
            .arm_indices(true)
            .iter()
            .map(|&i| d.outcome()[i])
            .sum::<f64>()
            / d.n_treated() as f64;
        let c_mean = d
            .arm_indices(false)
            .iter()
            .map(|&i| d.outcome()[i])
            .sum::<f64>()
            / d.n_control() as f64;
        assert_abs_diff_eq!(est.tau_hat, t_mean - c_mean, epsilon = 1e-12);
    }

    #[test]
    fn hajek_hand_oracle() {
        // Treated rows with Y = 1, 3 and scores 0.5, 0.25; control Y = 2 at 0.5.
        let d = Dataset::new(
            array![[0.0], [1.0], [2.0]],
            vec![1, 1, 0],
            array![1.0, 3.0, 2.0],
        )
        .unwrap();
        let scores = array![0.5, 0.25, 0.5];
        let est = estimate_hajek(&d, scores.view()).unwrap();
        assert_abs_diff_eq!(est.tau_hat, 14.0 / 6.0 - 2.0, epsilon = 1e-12);
    }

    #[test]
    fn hajek_equals_intercept_only_ipwra() {
        for seed in 0..20 {
            let d = linear_dataset(80, 1.5, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let scores = Array1::from_iter((0..d.n()).map(|_| 0.1 + 0.8 * rng.random::<f64>()));
            let hajek = estimate_hajek(&d, scores.view()).unwrap();
            let (ipwra, _) =
                estimate_ipwra_with(&d, scores.view(), FeatureSet::InterceptOnly).unwrap();
            assert_abs_diff_eq!(hajek.tau_hat, ipwra.tau_hat, epsilon = 1e-10);
        }
    }

    #[test]
    fn ipwra_exact_fit_recovers_effect_under_any_weights() {
        let d = linear_dataset(120, 2.0, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let scores = Array1::from_iter((0..d.n()).map(|_| 0.05 + 0.9 * rng.random::<f64>()));
        let (est, _) = estimate_ipwra(&d, scores.view()).unwrap();
        assert_abs_diff_eq!(est.tau_hat, 2.0, epsilon = 1e-10);
    }

    #[test]
    fn ipwra_bias_terms_vanish_by_foc() {
        let d = noisy_dataset(300, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let scores = Array1::from_iter((0..d.n()).map(|_| 0.1 + 0.8 * rng.random::<f64>()));
        let (est, _) = estimate_ipwra(&d, scores.view()).unwrap();
        let scale = d.outcome().iter().map(|y| y.abs()).sum::<f64>() / d.n() as f64;
        assert!(est.bias_treated.abs() <= 1e-8 * scale.max(1.0));
        assert!(est.bias_control.abs() <= 1e-8 * scale.max(1.0));
    }

    fn noisy_dataset(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Array2::zeros((n, 2));
        let mut z = Vec::with_capacity(n);
        let mut y = Array1::zeros(n);
        for i in 0..n {
            x[[i, 0]] = rng.sample::<f64, _>(rand_distr::StandardNormal);
            x[[i, 1]] = rng.sample::<f64, _>(rand_distr::StandardNormal);
            let zi = u8::from(rng.random::<f64>() < 0.5);
            z.push(zi);
            let eps: f64 = rng.sample(rand_distr::StandardNormal);
            y[i] = 2.0 * f64::from(zi) + x[[i, 0]] + 0.3 * x[[i, 0]] * x[[i, 0]] + eps;
        }
        Dataset::new(x, z, y).unwrap()
    }

    #[test]
    fn aipw_with_zero_models_is_horvitz_thompson() {
        let d = noisy_dataset(100, 21);
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let scores = Array1::from_iter((0..d.n()).map(|_| 0.2 + 0.6 * rng.random::<f64>()));
        let zero = OutcomeModelPair {
            treated: LinearCoefficients { intercept: 0.0, slopes: vec![0.0, 0.0] },
            control: LinearCoefficients { intercept: 0.0, slopes: vec![0.0, 0.0] },
            features: FeatureSet::Linear,
        };
        let est = estimate_aipw(&d, scores.view(), &zero).unwrap();

        let n = d.n() as f64;
        let mut ht = 0.0;
        for ((&z, &s), &y) in d.treatment().iter().zip(scores.iter()).zip(d.outcome().iter()) {
            if z == 1 {
                ht += y / s / n;
            } else {
                ht -= y / (1.0 - s) / n;
            }
        }
        assert_abs_diff_eq!(est.tau_hat, ht, epsilon = 1e-12);
    }

    #[test]
    fn aipw_with_ipwra_models_matches_ipwra() {
        let d = noisy_dataset(250, 31);
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let scores = Array1::from_iter((0..d.n()).map(|_| 0.15 + 0.7 * rng.random::<f64>()));
        let (ipwra, models) = estimate_ipwra(&d, scores.view()).unwrap();
        let aipw = estimate_aipw(&d, scores.view(), &models).unwrap();
        assert_abs_diff_eq!(aipw.tau_hat, ipwra.tau_hat, epsilon = 1e-8);
    }

    #[test]
    fn common_shift_leaves_or_tau_unchanged() {
        let d = noisy_dataset(200, 41);
        let models = fit_outcome_models_or(&d).unwrap();
        let tau = ate_from_models(&d, &models);
        let mut shifted = models.clone();
        shifted.treated.intercept += 17.25;
        shifted.control.intercept += 17.25;
        assert_abs_diff_eq!(ate_from_models(&d, &shifted), tau, epsilon = 1e-10);
    }

    #[test]
    fn estimators_reject_bad_scores() {
        let d = noisy_dataset(50, 51);
        let bad_len = Array1::from_elem(10, 0.5);
        assert!(estimate_hajek(&d, bad_len.view()).is_err());
        let bad_range = Array1::from_elem(d.n(), 1.0);
        assert!(estimate_hajek(&d, bad_range.view()).is_err());
        assert!(estimate_ipwra(&d, bad_range.view()).is_err());
    }

    #[test]
    fn estimator_kind_round_trips_names() {
        for kind in EstimatorKind::ALL {
            assert_eq!(kind.name().parse::<EstimatorKind>().unwrap(), kind);
        }
        assert!("nope".parse::<EstimatorKind>().is_err());
    }
}
