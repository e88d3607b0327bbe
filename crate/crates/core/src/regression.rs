//! From-scratch regression kernels.
//!
//! Two primitives everything else is built on: weighted least squares with a
//! free intercept (the design matrix must already carry its leading all-ones
//! column — kernels never add one) and logistic regression fitted by
//! iteratively reweighted least squares on a ridge-penalized negative
//! log-likelihood. Both are pure and deterministic.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::Serialize;

use crate::error::{Error, Result};

/// Intercept-plus-linear coefficients for one outcome model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearCoefficients {
    pub intercept: f64,
    pub slopes: Vec<f64>,
}

impl LinearCoefficients {
    /// Flat `[intercept, slopes...]` vector matching a design with a leading
    /// ones column.
    pub fn to_full(&self) -> Array1<f64> {
        let mut v = Vec::with_capacity(1 + self.slopes.len());
        v.push(self.intercept);
        v.extend_from_slice(&self.slopes);
        Array1::from_vec(v)
    }

    pub fn from_full(full: ArrayView1<f64>) -> Self {
        Self {
            intercept: full[0],
            slopes: full.iter().skip(1).copied().collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.intercept.is_finite() && self.slopes.iter().all(|s| s.is_finite())
    }
}

/// Coefficients of a logistic model on the linear predictor scale.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogisticCoefficients {
    pub intercept: f64,
    pub slopes: Vec<f64>,
}

impl LogisticCoefficients {
    pub fn to_full(&self) -> Array1<f64> {
        let mut v = Vec::with_capacity(1 + self.slopes.len());
        v.push(self.intercept);
        v.extend_from_slice(&self.slopes);
        Array1::from_vec(v)
    }
}

/// IRLS solver settings.
#[derive(Debug, Clone, Serialize)]
pub struct IrlsConfig {
    pub max_iterations: usize,
    /// Max-norm threshold on the penalized gradient.
    pub gradient_tolerance: f64,
    /// Ridge penalty applied to every coefficient, always — bootstrap
    /// resamples routinely come close to separation.
    pub ridge: f64,
}

impl Default for IrlsConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            gradient_tolerance: 1e-8,
            ridge: 1e-6,
        }
    }
}

impl IrlsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gradient_tolerance > 0.0) {
            return Err(Error::InvalidArgument(
                "gradient_tolerance must be positive".into(),
            ));
        }
        if !(self.ridge >= 0.0) {
            return Err(Error::InvalidArgument("ridge must be non-negative".into()));
        }
        Ok(())
    }
}

/// A fitted logistic model together with its convergence record.
#[derive(Debug, Clone)]
pub struct LogisticFit {
    pub coefficients: LogisticCoefficients,
    pub converged: bool,
    pub iterations: usize,
    /// Max-norm of the penalized gradient at the returned coefficients.
    pub gradient_norm: f64,
}

/// Numerically stable logistic function, 1 / (1 + exp(-u)).
pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// Solve `a * x = b` for a symmetric positive-definite `a` by Cholesky
/// factorization. Returns `None` if a pivot is not strictly positive.
pub(crate) fn solve_spd(a: &Array2<f64>, b: ArrayView1<f64>) -> Option<Array1<f64>> {
    let p = a.nrows();
    debug_assert_eq!(a.ncols(), p);
    debug_assert_eq!(b.len(), p);

    // Lower-triangular factor, row-major.
    let mut l = vec![0.0f64; p * p];
    for i in 0..p {
        for j in 0..=i {
            let mut sum = a[[i, j]];
            for k in 0..j {
                sum -= l[i * p + k] * l[j * p + k];
            }
            if i == j {
                if !(sum > 0.0) || !sum.is_finite() {
                    return None;
                }
                l[i * p + i] = sum.sqrt();
            } else {
                l[i * p + j] = sum / l[j * p + j];
            }
        }
    }

    // Forward then backward substitution.
    let mut x = b.to_owned();
    for i in 0..p {
        for k in 0..i {
            x[i] -= l[i * p + k] * x[k];
        }
        x[i] /= l[i * p + i];
    }
    for i in (0..p).rev() {
        for k in (i + 1)..p {
            x[i] -= l[k * p + i] * x[k];
        }
        x[i] /= l[i * p + i];
    }
    Some(x)
}

/// Solve the normal equations, retrying once with a ridge jitter of
/// `1e-8 * mean(diag)` when the plain factorization fails.
pub(crate) fn solve_normal_equations(mut a: Array2<f64>, b: ArrayView1<f64>) -> Result<Array1<f64>> {
    if let Some(x) = solve_spd(&a, b) {
        return Ok(x);
    }
    let p = a.nrows();
    let mean_diag = (0..p).map(|i| a[[i, i]]).sum::<f64>() / p as f64;
    let jitter = 1e-8 * mean_diag.abs().max(1.0);
    for i in 0..p {
        a[[i, i]] += jitter;
    }
    solve_spd(&a, b).ok_or(Error::Rank)
}

fn check_design(design: ArrayView2<f64>, response_len: usize, weights_len: usize) -> Result<()> {
    let n = design.nrows();
    if response_len != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: response_len,
        });
    }
    if weights_len != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: weights_len,
        });
    }
    Ok(())
}

/// Minimize `sum_i w_i (y_i - design_i . beta)^2` over `beta`.
///
/// The design must carry a leading all-ones column; the intercept-column
/// first-order condition then makes the weighted residuals sum to zero.
/// Weights must be strictly positive and finite.
pub fn fit_weighted_least_squares(
    design: ArrayView2<f64>,
    response: ArrayView1<f64>,
    weights: ArrayView1<f64>,
) -> Result<LinearCoefficients> {
    check_design(design, response.len(), weights.len())?;
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "weights must be strictly positive and finite, found {w}"
        )));
    }

    let n = design.nrows();
    let p = design.ncols();
    let mut a = Array2::zeros((p, p));
    let mut b = Array1::zeros(p);
    for i in 0..n {
        let row = design.row(i);
        let w = weights[i];
        let wy = w * response[i];
        for j in 0..p {
            b[j] += wy * row[j];
            for k in 0..=j {
                a[[j, k]] += w * row[j] * row[k];
            }
        }
    }
    for j in 0..p {
        for k in (j + 1)..p {
            a[[j, k]] = a[[k, j]];
        }
    }

    let beta = solve_normal_equations(a, b.view())?;
    Ok(LinearCoefficients::from_full(beta.view()))
}

/// Evaluate `intercept + slopes . x` for every row of `covariates`.
pub fn predict_linear(coeffs: &LinearCoefficients, covariates: ArrayView2<f64>) -> Result<Array1<f64>> {
    if covariates.ncols() != coeffs.slopes.len() {
        return Err(Error::DimensionMismatch {
            expected: coeffs.slopes.len(),
            found: covariates.ncols(),
        });
    }
    let mut out = Array1::from_elem(covariates.nrows(), coeffs.intercept);
    for (i, row) in covariates.rows().into_iter().enumerate() {
        let mut acc = 0.0;
        for (s, x) in coeffs.slopes.iter().zip(row.iter()) {
            acc += s * x;
        }
        out[i] += acc;
    }
    Ok(out)
}

/// Penalized negative log-likelihood, computed in a form that does not
/// overflow for large linear predictors.
fn penalized_nll(eta: &Array1<f64>, labels: &[u8], beta: &Array1<f64>, ridge: f64) -> f64 {
    let mut nll = 0.0;
    for (&e, &y) in eta.iter().zip(labels) {
        let y = f64::from(y);
        // ln(1 + exp(e)) - y*e, stable on both signs of e.
        nll += if e > 0.0 {
            (1.0 - y) * e + (-e).exp().ln_1p()
        } else {
            -y * e + e.exp().ln_1p()
        };
    }
    nll + 0.5 * ridge * beta.iter().map(|b| b * b).sum::<f64>()
}

/// Fit logistic regression by IRLS (Newton with step halving) on the
/// ridge-penalized negative log-likelihood, starting from the zero vector.
///
/// Returns with `converged = false` instead of erroring when the gradient
/// tolerance is not reached within `max_iterations`; a single-class label
/// vector is an error.
pub fn fit_logistic(
    design: ArrayView2<f64>,
    labels: &[u8],
    config: &IrlsConfig,
) -> Result<LogisticFit> {
    config.validate()?;
    let n = design.nrows();
    check_design(design, labels.len(), labels.len())?;
    let ones = labels.iter().filter(|&&y| y == 1).count();
    if ones == 0 || ones == n {
        return Err(Error::SingleClass);
    }

    let p = design.ncols();
    let ridge = config.ridge;
    let mut beta: Array1<f64> = Array1::zeros(p);
    let mut eta: Array1<f64> = Array1::zeros(n);
    let mut nll = penalized_nll(&eta, labels, &beta, ridge);
    let mut converged = false;
    let mut iterations = 0;
    let mut grad_norm = f64::INFINITY;

    for iter in 0..=config.max_iterations {
        // Gradient g = X^T (p - y) + ridge * beta and Hessian X^T S X + ridge I.
        let probs: Array1<f64> = eta.mapv(sigmoid);
        let mut grad = Array1::zeros(p);
        let mut hess = Array2::zeros((p, p));
        for i in 0..n {
            let row = design.row(i);
            let resid = probs[i] - f64::from(labels[i]);
            let s = probs[i] * (1.0 - probs[i]);
            for j in 0..p {
                grad[j] += resid * row[j];
                for k in 0..=j {
                    hess[[j, k]] += s * row[j] * row[k];
                }
            }
        }
        for j in 0..p {
            grad[j] += ridge * beta[j];
            hess[[j, j]] += ridge;
            for k in (j + 1)..p {
                hess[[j, k]] = hess[[k, j]];
            }
        }

        grad_norm = grad.iter().fold(0.0f64, |m, g: &f64| m.max(g.abs()));
        iterations = iter;
        if grad_norm <= config.gradient_tolerance {
            converged = true;
            break;
        }
        if iter == config.max_iterations {
            break;
        }

        let step = solve_normal_equations(hess, grad.view())?;
        let descent: f64 = grad.iter().zip(step.iter()).map(|(g, s)| g * s).sum();

        // Backtracking keeps the Newton step inside the convex bowl.
        let mut t = 1.0;
        loop {
            let candidate = &beta - &(t * &step);
            let cand_eta = design.dot(&candidate);
            let cand_nll = penalized_nll(&cand_eta, labels, &candidate, ridge);
            if cand_nll <= nll - 1e-4 * t * descent || t < 1e-12 {
                beta = candidate;
                eta = cand_eta;
                nll = cand_nll;
                break;
            }
            t *= 0.5;
        }
    }

    Ok(LogisticFit {
        coefficients: LogisticCoefficients {
            intercept: beta[0],
            slopes: beta.iter().skip(1).copied().collect(),
        },
        converged,
        iterations,
        gradient_norm: grad_norm,
    })
}
