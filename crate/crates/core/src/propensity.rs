//! Propensity-score estimation: a logistic point fit and a bootstrap
//! ensemble of score vectors over the original units.
//!
//! Each ensemble world resamples the dataset with replacement, refits the
//! logistic model, and predicts on the original rows. World seeds are derived
//! deterministically from the base seed and the world index, so the score
//! matrix is bit-identical across runs and worker counts.

use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::regression::{fit_logistic, sigmoid, IrlsConfig, LogisticCoefficients};
use crate::seeding;

/// Retries per world before giving up on a pathologically imbalanced dataset.
const MAX_RESAMPLE_RETRIES: usize = 100;

/// A fitted propensity model with in-sample scores on the original rows.
#[derive(Debug, Clone)]
pub struct PropensityFit {
    pub coefficients: LogisticCoefficients,
    pub scores: Array1<f64>,
    pub converged: bool,
}

/// Bootstrap propensity scores: `B` worlds by `N` original units.
#[derive(Debug, Clone)]
pub struct PropensityEnsemble {
    score_matrix: Array2<f64>,
    seeds: Vec<u64>,
    clip: f64,
}

impl PropensityEnsemble {
    /// Wrap an existing score matrix; every entry must lie in
    /// `[clip, 1 - clip]` (and strictly inside (0, 1)).
    pub fn from_score_matrix(score_matrix: Array2<f64>, seeds: Vec<u64>, clip: f64) -> Result<Self> {
        if score_matrix.nrows() == 0 {
            return Err(Error::InvalidArgument("ensemble needs at least one world".into()));
        }
        if seeds.len() != score_matrix.nrows() {
            return Err(Error::DimensionMismatch {
                expected: score_matrix.nrows(),
                found: seeds.len(),
            });
        }
        let lo = clip.max(0.0);
        let hi = 1.0 - lo;
        if score_matrix.iter().any(|&s| !(s >= lo && s <= hi && s > 0.0 && s < 1.0)) {
            return Err(Error::InvalidArgument(
                "ensemble scores must lie in [clip, 1-clip] within (0, 1)".into(),
            ));
        }
        Ok(Self { score_matrix, seeds, clip })
    }

    pub fn b_count(&self) -> usize {
        self.score_matrix.nrows()
    }

    pub fn n(&self) -> usize {
        self.score_matrix.ncols()
    }

    pub fn clip(&self) -> f64 {
        self.clip
    }

    pub fn seeds(&self) -> &[u64] {
        &self.seeds
    }

    pub fn score_matrix(&self) -> ArrayView2<'_, f64> {
        self.score_matrix.view()
    }

    /// Scores of one world over the original units.
    pub fn world(&self, b: usize) -> ArrayView1<'_, f64> {
        self.score_matrix.row(b)
    }

    /// Across-world mean score per unit.
    pub fn mean_scores(&self) -> Array1<f64> {
        let b = self.b_count() as f64;
        let mut out = Array1::zeros(self.n());
        for row in self.score_matrix.rows() {
            out += &row;
        }
        out / b
    }

    /// Across-world standard deviation per unit.
    pub fn score_std(&self) -> Array1<f64> {
        let b = self.b_count() as f64;
        let mean = self.mean_scores();
        let mut out = Array1::zeros(self.n());
        for row in self.score_matrix.rows() {
            for (o, (&s, &m)) in out.iter_mut().zip(row.iter().zip(mean.iter())) {
                *o += (s - m) * (s - m);
            }
        }
        out.mapv(|v: f64| (v / b).sqrt())
    }
}

/// Design matrix for the propensity model: intercept plus raw covariates.
fn propensity_design(d: &Dataset) -> Array2<f64> {
    let (n, k) = (d.n(), d.d());
    let mut design = Array2::ones((n, k + 1));
    design
        .slice_mut(ndarray::s![.., 1..])
        .assign(&d.covariates());
    design
}

/// Machine-precision floor keeping predicted scores strictly inside (0, 1).
fn open_unit_interval(s: f64) -> f64 {
    s.clamp(f64::EPSILON, 1.0 - f64::EPSILON)
}

fn predict_scores(design: ArrayView2<f64>, coeffs: &LogisticCoefficients) -> Array1<f64> {
    let full = coeffs.to_full();
    design.dot(&full).mapv(|eta| open_unit_interval(sigmoid(eta)))
}

/// Fit the logistic propensity model on the full dataset and score every
/// original row.
pub fn fit_propensity(d: &Dataset, config: &IrlsConfig) -> Result<PropensityFit> {
    let design = propensity_design(d);
    let fit = fit_logistic(design.view(), d.treatment(), config)?;
    let scores = predict_scores(design.view(), &fit.coefficients);
    Ok(PropensityFit {
        coefficients: fit.coefficients,
        scores,
        converged: fit.converged,
    })
}

/// Clip every score into `[epsilon, 1 - epsilon]`, preserving order.
///
/// `epsilon = 0` is the identity map; clipping is idempotent.
pub fn clip_scores(scores: ArrayView1<f64>, epsilon: f64) -> Result<Array1<f64>> {
    if !(0.0..0.5).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must lie in [0, 0.5), got {epsilon}"
        )));
    }
    Ok(scores.mapv(|s| s.clamp(epsilon, 1.0 - epsilon)))
}

/// Fit one bootstrap world on the given row indices and predict on the
/// original rows. Split out so tests can run it with identity indices.
pub(crate) fn fit_world_scores(
    d: &Dataset,
    original_design: ArrayView2<f64>,
    indices: &[usize],
    config: &IrlsConfig,
) -> Result<Array1<f64>> {
    let resample = d.select_rows(indices)?;
    let design = propensity_design(&resample);
    let fit = fit_logistic(design.view(), resample.treatment(), config)?;
    Ok(predict_scores(original_design, &fit.coefficients))
}

fn draw_indices(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Build a `b_count`-world bootstrap propensity ensemble.
///
/// World `b` resamples `N` rows with replacement using a seed mixed from
/// `(seed, b)`, fits the logistic model on the resample, predicts on the
/// original rows, and clips with `epsilon`. Single-class resamples are
/// redrawn with a fresh derived seed so exactly `b_count` worlds are
/// delivered; after 100 failed draws the dataset is declared degenerate.
pub fn bootstrap_propensity_ensemble(
    d: &Dataset,
    b_count: usize,
    seed: u64,
    config: &IrlsConfig,
    epsilon: f64,
) -> Result<PropensityEnsemble> {
    if b_count == 0 {
        return Err(Error::InvalidArgument("b_count must be at least 1".into()));
    }
    if !(0.0..0.5).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must lie in [0, 0.5), got {epsilon}"
        )));
    }
    let n = d.n();
    let original_design = propensity_design(d);

    let worlds: Result<Vec<(Array1<f64>, u64)>> = (0..b_count)
        .into_par_iter()
        .map(|b| {
            for attempt in 0..MAX_RESAMPLE_RETRIES {
                let world_seed = seeding::world_seed(seed, b, attempt);
                let mut rng = ChaCha8Rng::seed_from_u64(world_seed);
                let indices = draw_indices(&mut rng, n);
                let ones = indices.iter().filter(|&&i| d.treatment()[i] == 1).count();
                if ones == 0 || ones == indices.len() {
                    continue;
                }
                let scores = fit_world_scores(d, original_design.view(), &indices, config)?;
                let clipped = clip_scores(scores.view(), epsilon)?;
                return Ok((clipped, world_seed));
            }
            Err(Error::DegenerateResample {
                world: b,
                attempts: MAX_RESAMPLE_RETRIES,
            })
        })
        .collect();
    let worlds = worlds?;

    let mut score_matrix = Array2::zeros((b_count, n));
    let mut seeds = Vec::with_capacity(b_count);
    for (b, (scores, world_seed)) in worlds.into_iter().enumerate() {
        score_matrix.row_mut(b).assign(&scores);
        seeds.push(world_seed);
    }
    // Scores came out of the sigmoid guard and clip, so the wrap cannot fail.
    PropensityEnsemble::from_score_matrix(score_matrix, seeds, epsilon)
}

/// Dump the ensemble as CSV: one line per world, the world index followed by
/// the `N` scores.
pub fn write_ensemble_csv(ensemble: &PropensityEnsemble, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for (b, row) in ensemble.score_matrix().rows().into_iter().enumerate() {
        write!(out, "{b}")?;
        for s in row.iter() {
            write!(out, ",{s}")?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}
