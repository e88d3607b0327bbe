//! Python bindings: dataset generation, validation, the estimator family,
//! and the Monte Carlo benchmark, all over plain lists and dicts.

use ndarray::{Array1, Array2};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use pyo3::IntoPyObjectExt;

use robust_ate::{
    bootstrap_propensity_ensemble, clip_scores, estimate_aipw, estimate_hajek,
    estimate_ipwra_with, estimate_jre_with, estimate_or_with, fit_outcome_models_or_with,
    fit_propensity, generate_dataset, load_dataset, run_monte_carlo, seeding, validate_dataset,
    BenchmarkConfig, CsvSchema, Dataset, DgpConfig, Error as CoreError, EstimatorKind,
    EstimatorSet, FeatureSet, IrlsConfig, JreConfig,
};

fn to_py_err(err: CoreError) -> PyErr {
    match err {
        CoreError::Io(_) | CoreError::Csv(_) => PyIOError::new_err(err.to_string()),
        _ => PyValueError::new_err(err.to_string()),
    }
}

fn dataset_from_parts(x: Vec<Vec<f64>>, z: Vec<u8>, y: Vec<f64>) -> PyResult<Dataset> {
    let n = x.len();
    let d = x.first().map(Vec::len).unwrap_or(0);
    if x.iter().any(|row| row.len() != d) {
        return Err(PyValueError::new_err("covariate rows must all have the same length"));
    }
    let flat: Vec<f64> = x.into_iter().flatten().collect();
    let covariates = Array2::from_shape_vec((n, d), flat)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    Dataset::new(covariates, z, Array1::from_vec(y)).map_err(to_py_err)
}

fn json_to_py(py: Python<'_>, value: &serde_json::Value) -> PyResult<Py<PyAny>> {
    use serde_json::Value;
    match value {
        Value::Null => Ok(py.None()),
        Value::Bool(b) => b.into_py_any(py),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_py_any(py)
            } else if let Some(u) = n.as_u64() {
                u.into_py_any(py)
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_py_any(py)
            }
        }
        Value::String(s) => s.into_py_any(py),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_py_any(py)
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, v) in map {
                dict.set_item(k, json_to_py(py, v)?)?;
            }
            dict.into_py_any(py)
        }
    }
}

fn parse_features(feature_set: &str) -> PyResult<FeatureSet> {
    feature_set.parse::<FeatureSet>().map_err(to_py_err)
}

fn parse_estimator_set(names: Option<Vec<String>>) -> PyResult<EstimatorSet> {
    let names = names.unwrap_or_else(|| {
        EstimatorKind::ALL.iter().map(|k| k.name().to_string()).collect()
    });
    let mut set = EstimatorSet::new();
    for name in &names {
        set.insert(name.parse::<EstimatorKind>().map_err(to_py_err)?);
    }
    Ok(set)
}

/// Draw one synthetic dataset; returns covariates, treatment, outcome, both
/// potential outcomes, the true propensity scores, and the true ATE.
#[pyfunction]
#[pyo3(signature = (n, t, noise_sd=1.0, seed=0))]
fn generate(py: Python<'_>, n: usize, t: f64, noise_sd: f64, seed: u64) -> PyResult<Py<PyAny>> {
    let sim = generate_dataset(&DgpConfig { n, t, noise_sd, seed }).map_err(to_py_err)?;
    let d = &sim.observed;
    let x: Vec<Vec<f64>> = d.covariates().rows().into_iter().map(|r| r.to_vec()).collect();
    let out = PyDict::new(py);
    out.set_item("x", x)?;
    out.set_item("z", d.treatment().to_vec())?;
    out.set_item("y", d.outcome().to_vec())?;
    out.set_item("y1", sim.y1.to_vec())?;
    out.set_item("y0", sim.y0.to_vec())?;
    out.set_item("true_scores", sim.true_scores.to_vec())?;
    out.set_item("true_tau", sim.true_tau)?;
    out.into_py_any(py)
}

/// Load a dataset CSV with header x1,...,xd,z,y.
#[pyfunction]
fn load_csv(py: Python<'_>, path: &str) -> PyResult<Py<PyAny>> {
    let d = load_dataset(std::path::Path::new(path), &CsvSchema::default()).map_err(to_py_err)?;
    let x: Vec<Vec<f64>> = d.covariates().rows().into_iter().map(|r| r.to_vec()).collect();
    let out = PyDict::new(py);
    out.set_item("x", x)?;
    out.set_item("z", d.treatment().to_vec())?;
    out.set_item("y", d.outcome().to_vec())?;
    out.into_py_any(py)
}

/// Semantic checks: arm counts and diagnostic codes.
#[pyfunction]
fn validate(py: Python<'_>, x: Vec<Vec<f64>>, z: Vec<u8>, y: Vec<f64>) -> PyResult<Py<PyAny>> {
    let dataset = dataset_from_parts(x, z, y)?;
    let report = validate_dataset(&dataset);
    let out = PyDict::new(py);
    out.set_item("n_treated", report.n_treated)?;
    out.set_item("n_control", report.n_control)?;
    out.set_item(
        "issues",
        report.issues.iter().map(|i| i.to_string()).collect::<Vec<_>>(),
    )?;
    out.into_py_any(py)
}

/// Logistic propensity fit on the full data; returns in-sample scores.
#[pyfunction]
fn propensity_scores(py: Python<'_>, x: Vec<Vec<f64>>, z: Vec<u8>, y: Vec<f64>) -> PyResult<Py<PyAny>> {
    let dataset = dataset_from_parts(x, z, y)?;
    let fit = fit_propensity(&dataset, &IrlsConfig::default()).map_err(to_py_err)?;
    let out = PyDict::new(py);
    out.set_item("scores", fit.scores.to_vec())?;
    out.set_item("converged", fit.converged)?;
    out.set_item("intercept", fit.coefficients.intercept)?;
    out.set_item("slopes", fit.coefficients.slopes.clone())?;
    out.into_py_any(py)
}

/// Bootstrap propensity ensemble: `b_count` rows of per-unit scores.
#[pyfunction]
#[pyo3(signature = (x, z, y, b_count, seed=0, epsilon=0.01))]
fn bootstrap_ensemble(
    py: Python<'_>,
    x: Vec<Vec<f64>>,
    z: Vec<u8>,
    y: Vec<f64>,
    b_count: usize,
    seed: u64,
    epsilon: f64,
) -> PyResult<Py<PyAny>> {
    let dataset = dataset_from_parts(x, z, y)?;
    let ensemble =
        bootstrap_propensity_ensemble(&dataset, b_count, seed, &IrlsConfig::default(), epsilon)
            .map_err(to_py_err)?;
    let rows: Vec<Vec<f64>> = ensemble
        .score_matrix()
        .rows()
        .into_iter()
        .map(|r| r.to_vec())
        .collect();
    rows.into_py_any(py)
}

/// Run the requested estimators on one dataset.
///
/// Mirrors the CLI pipeline: one shared propensity fit (clipped with
/// `epsilon`) for Hajek/IPWRA/AIPW, unweighted OR models for AIPW, and a
/// seeded bootstrap ensemble for JRE. Returns a dict keyed by estimator
/// name; failures map to `{"error": ...}` instead of raising.
#[pyfunction]
#[pyo3(signature = (x, z, y, estimators=None, b_count=1000, seed=42, anchor_strength=None, epsilon=0.01, feature_set="linear"))]
#[allow(clippy::too_many_arguments)]
fn estimate(
    py: Python<'_>,
    x: Vec<Vec<f64>>,
    z: Vec<u8>,
    y: Vec<f64>,
    estimators: Option<Vec<String>>,
    b_count: usize,
    seed: u64,
    anchor_strength: Option<f64>,
    epsilon: f64,
    feature_set: &str,
) -> PyResult<Py<PyAny>> {
    let dataset = dataset_from_parts(x, z, y)?;
    let set = parse_estimator_set(estimators)?;
    let features = parse_features(feature_set)?;
    let irls = IrlsConfig::default();
    let jre_config = JreConfig {
        anchor_strength,
        epsilon,
        b_count,
        seed,
    };

    let needs_scores = [EstimatorKind::Hajek, EstimatorKind::Ipwra, EstimatorKind::Aipw]
        .iter()
        .any(|k| set.contains(k));
    let scores = if needs_scores {
        Some(
            fit_propensity(&dataset, &irls)
                .and_then(|fit| clip_scores(fit.scores.view(), epsilon)),
        )
    } else {
        None
    };

    let out = PyDict::new(py);
    for &kind in &set {
        let result = match kind {
            EstimatorKind::Or => estimate_or_with(&dataset, features),
            EstimatorKind::Hajek | EstimatorKind::Ipwra | EstimatorKind::Aipw => {
                match scores.as_ref().expect("scores computed") {
                    Ok(s) => match kind {
                        EstimatorKind::Hajek => estimate_hajek(&dataset, s.view()),
                        EstimatorKind::Ipwra => {
                            estimate_ipwra_with(&dataset, s.view(), features).map(|(e, _)| e)
                        }
                        EstimatorKind::Aipw => fit_outcome_models_or_with(&dataset, features)
                            .and_then(|models| estimate_aipw(&dataset, s.view(), &models)),
                        _ => unreachable!(),
                    },
                    Err(e) => Err(CoreError::InvalidArgument(e.to_string())),
                }
            }
            EstimatorKind::Jre => {
                let ens_seed = seeding::ensemble_seed(seed);
                bootstrap_propensity_ensemble(&dataset, b_count, ens_seed, &irls, epsilon)
                    .and_then(|ens| estimate_jre_with(&dataset, &ens, &jre_config, features))
            }
        };
        match result {
            Ok(est) => {
                let value = serde_json::to_value(&est)
                    .map_err(|e| PyValueError::new_err(e.to_string()))?;
                out.set_item(kind.name(), json_to_py(py, &value)?)?;
            }
            Err(err) => {
                let item = PyDict::new(py);
                item.set_item("error", err.to_string())?;
                out.set_item(kind.name(), item)?;
            }
        }
    }
    out.into_py_any(py)
}

/// Run the Monte Carlo benchmark grid; returns the full report as a dict.
#[pyfunction]
#[pyo3(signature = (n_list, t_list, reps, b_count=1000, seed=42, anchor_strength=None, epsilon=0.01, noise_sd=1.0, estimators=None, feature_set="linear"))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    py: Python<'_>,
    n_list: Vec<usize>,
    t_list: Vec<f64>,
    reps: usize,
    b_count: usize,
    seed: u64,
    anchor_strength: Option<f64>,
    epsilon: f64,
    noise_sd: f64,
    estimators: Option<Vec<String>>,
    feature_set: &str,
) -> PyResult<Py<PyAny>> {
    let config = BenchmarkConfig {
        n_values: n_list,
        t_values: t_list,
        reps,
        b_count,
        noise_sd,
        base_seed: seed,
        estimators: parse_estimator_set(estimators)?,
        features: parse_features(feature_set)?,
    };
    let jre_config = JreConfig {
        anchor_strength,
        epsilon,
        b_count,
        seed,
    };
    let report = run_monte_carlo(&config, &jre_config).map_err(to_py_err)?;
    let value = serde_json::to_value(&report).map_err(|e| PyValueError::new_err(e.to_string()))?;
    json_to_py(py, &value)
}

#[pymodule]
fn _robust_ate(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(load_csv, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(propensity_scores, m)?)?;
    m.add_function(wrap_pyfunction!(bootstrap_ensemble, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add("TRUE_TAU", robust_ate::TRUE_TAU)?;
    m.add("__version__", robust_ate::VERSION)?;
    Ok(())
}
