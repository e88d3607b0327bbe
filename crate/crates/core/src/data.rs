//! Observed-data containers, CSV ingestion, and validation.
//!
//! A [`Dataset`] holds the observed triples: an `N x d` covariate matrix, a
//! binary treatment vector, and an outcome vector, all in file/row order.
//! Construction enforces structure (shared length, `N >= 2`, treatment in
//! {0, 1}); semantic problems such as an empty treatment arm, non-finite
//! values, or a constant covariate column are reported — not thrown — by
//! [`validate_dataset`], so callers can decide what is fatal for them.

use std::fmt;
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::Serialize;

use crate::error::{Error, Result};

/// Immutable observed dataset: covariates `X` (N x d), treatment `Z` (0/1),
/// outcome `Y`. Row order is significant and preserved everywhere; bootstrap
/// indices refer to these row positions.
#[derive(Debug, Clone)]
pub struct Dataset {
    covariates: Array2<f64>,
    treatment: Vec<u8>,
    outcome: Array1<f64>,
}

impl Dataset {
    /// Build a dataset, checking structural invariants: equal row counts,
    /// `N >= 2`, at least one covariate column, and treatment values in
    /// {0, 1}. Content-level checks live in [`validate_dataset`].
    pub fn new(covariates: Array2<f64>, treatment: Vec<u8>, outcome: Array1<f64>) -> Result<Self> {
        let n = covariates.nrows();
        if n < 2 {
            return Err(Error::TooFewRows { found: n });
        }
        if covariates.ncols() == 0 {
            return Err(Error::InvalidArgument(
                "dataset needs at least one covariate column".into(),
            ));
        }
        if treatment.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: treatment.len(),
            });
        }
        if outcome.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: outcome.len(),
            });
        }
        if let Some(pos) = treatment.iter().position(|&z| z > 1) {
            return Err(Error::InvalidArgument(format!(
                "treatment value at row {} is not 0 or 1",
                pos + 1
            )));
        }
        Ok(Self {
            covariates,
            treatment,
            outcome,
        })
    }

    pub fn n(&self) -> usize {
        self.covariates.nrows()
    }

    pub fn d(&self) -> usize {
        self.covariates.ncols()
    }

    pub fn covariates(&self) -> ArrayView2<'_, f64> {
        self.covariates.view()
    }

    pub fn treatment(&self) -> &[u8] {
        &self.treatment
    }

    pub fn outcome(&self) -> ArrayView1<'_, f64> {
        self.outcome.view()
    }

    pub fn n_treated(&self) -> usize {
        self.treatment.iter().filter(|&&z| z == 1).count()
    }

    pub fn n_control(&self) -> usize {
        self.n() - self.n_treated()
    }

    /// Row indices of one treatment arm, in dataset order.
    pub fn arm_indices(&self, treated: bool) -> Vec<usize> {
        let want = u8::from(treated);
        self.treatment
            .iter()
            .enumerate()
            .filter_map(|(i, &z)| (z == want).then_some(i))
            .collect()
    }

    /// Dataset made of the given rows (with repetition), in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let d = self.d();
        let mut covs = Array2::zeros((indices.len(), d));
        let mut z = Vec::with_capacity(indices.len());
        let mut y = Array1::zeros(indices.len());
        for (row, &i) in indices.iter().enumerate() {
            covs.row_mut(row).assign(&self.covariates.row(i));
            z.push(self.treatment[i]);
            y[row] = self.outcome[i];
        }
        Dataset::new(covs, z, y)
    }
}

/// Column-name mapping for CSV ingestion.
///
/// With `covariates: None`, every header column other than the treatment and
/// outcome columns is taken as a covariate, in header order. The default
/// schema matches the canonical header `x1,...,xd,z,y`.
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub treatment: String,
    pub outcome: String,
    pub covariates: Option<Vec<String>>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            treatment: "z".into(),
            outcome: "y".into(),
            covariates: None,
        }
    }
}

/// Diagnostic codes reported by [`validate_dataset`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Diagnostic {
    /// One treatment arm has no units ("treated" or "control").
    EmptyArm(String),
    /// A non-finite value in the named field.
    NonFinite(String),
    /// Covariate column (0-based) with all values identical.
    ConstantColumn(usize),
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::EmptyArm(arm) => write!(f, "empty-arm({arm})"),
            Diagnostic::NonFinite(field) => write!(f, "non-finite({field})"),
            Diagnostic::ConstantColumn(j) => write!(f, "constant-column(x{})", j + 1),
        }
    }
}

/// Outcome of the semantic checks on a dataset.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub n_treated: usize,
    pub n_control: usize,
    pub issues: Vec<Diagnostic>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Check the assumptions the estimators lean on: both arms populated, all
/// values finite, no degenerate covariate columns. Violations are reported,
/// never thrown.
pub fn validate_dataset(d: &Dataset) -> ValidationReport {
    let n_treated = d.n_treated();
    let n_control = d.n_control();
    let mut issues = Vec::new();

    if n_treated == 0 {
        issues.push(Diagnostic::EmptyArm("treated".into()));
    }
    if n_control == 0 {
        issues.push(Diagnostic::EmptyArm("control".into()));
    }
    if d.covariates().iter().any(|v| !v.is_finite()) {
        issues.push(Diagnostic::NonFinite("covariates".into()));
    }
    if d.outcome().iter().any(|v| !v.is_finite()) {
        issues.push(Diagnostic::NonFinite("outcome".into()));
    }
    for j in 0..d.d() {
        let col = d.covariates().column(j).to_owned();
        let first = col[0];
        if col.iter().all(|&v| v == first) {
            issues.push(Diagnostic::ConstantColumn(j));
        }
    }

    ValidationReport {
        n_treated,
        n_control,
        issues,
    }
}

fn parse_cell(field: &str, row: usize, column: &str) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| Error::Parse {
        row,
        column: column.to_string(),
        message: format!("'{field}' is not a number"),
    })
}

/// Load a dataset from a headered CSV file.
///
/// Rows are kept in file order. The treatment column must contain only 0/1
/// tokens; any other value is a parse error naming the offending data row
/// (1-based, excluding the header).
pub fn load_dataset(path: &Path, schema: &CsvSchema) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();

    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column '{name}'")))
    };
    let z_idx = find(&schema.treatment)?;
    let y_idx = find(&schema.outcome)?;
    let cov_idx: Vec<(usize, String)> = match &schema.covariates {
        Some(names) => names
            .iter()
            .map(|name| find(name).map(|i| (i, name.clone())))
            .collect::<Result<_>>()?,
        None => headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != z_idx && *i != y_idx)
            .map(|(i, h)| (i, h.clone()))
            .collect(),
    };
    if cov_idx.is_empty() {
        return Err(Error::Schema("no covariate columns in header".into()));
    }

    let d = cov_idx.len();
    let mut x_flat: Vec<f64> = Vec::new();
    let mut z: Vec<u8> = Vec::new();
    let mut y: Vec<f64> = Vec::new();

    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let row = row_idx + 1;
        let get = |i: usize, column: &str| -> Result<&str> {
            record.get(i).ok_or_else(|| Error::Parse {
                row,
                column: column.to_string(),
                message: "missing field".into(),
            })
        };

        for (i, name) in &cov_idx {
            x_flat.push(parse_cell(get(*i, name)?, row, name)?);
        }
        let z_val = parse_cell(get(z_idx, &schema.treatment)?, row, &schema.treatment)?;
        if z_val == 0.0 {
            z.push(0);
        } else if z_val == 1.0 {
            z.push(1);
        } else {
            return Err(Error::Parse {
                row,
                column: schema.treatment.clone(),
                message: format!("treatment value '{z_val}' is not 0 or 1"),
            });
        }
        y.push(parse_cell(get(y_idx, &schema.outcome)?, row, &schema.outcome)?);
    }

    let n = y.len();
    if n < 2 {
        return Err(Error::TooFewRows { found: n });
    }
    let covariates = Array2::from_shape_vec((n, d), x_flat)
        .expect("row-major covariate buffer matches (n, d)");
    Dataset::new(covariates, z, Array1::from_vec(y))
}

/// Write a dataset as CSV with the canonical header `x1,...,xd,z,y`.
///
/// Floats are written with the shortest representation that round-trips
/// exactly, so `load_dataset(write_dataset(d))` reproduces the values.
pub fn write_dataset(d: &Dataset, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let header: Vec<String> = (1..=d.d())
        .map(|j| format!("x{j}"))
        .chain(["z".to_string(), "y".to_string()])
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for i in 0..d.n() {
        let mut fields: Vec<String> = d.covariates().row(i).iter().map(|v| v.to_string()).collect();
        fields.push(d.treatment()[i].to_string());
        fields.push(d.outcome()[i].to_string());
        writeln!(out, "{}", fields.join(","))?;
    }
    out.flush()?;
    Ok(())
}
