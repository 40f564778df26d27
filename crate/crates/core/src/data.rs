//! Outcome matrix with a per-cell observed mask, plus covariates.
//!
//! Missing outcome cells are stored as NaN, so an update that accidentally
//! reads one poisons its result instead of silently using a stale value.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "DatasetRecord", into = "DatasetRecord")]
pub struct Dataset {
    n: usize,
    m: usize,
    p: usize,
    /// Row-major `n x m`, NaN where unobserved.
    y: Vec<f64>,
    observed: Vec<bool>,
    /// Row-major `n x p`.
    x: Vec<f64>,
    outcome_names: Vec<String>,
    covariate_names: Vec<String>,
    scale_factors: Option<Vec<f64>>,
    rows_by_outcome: Vec<Vec<usize>>,
    outcomes_by_row: Vec<Vec<usize>>,
}

/// Equal when shapes, names, masks and every observed value agree; the
/// placeholders in missing cells are ignored.
impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.m == other.m
            && self.p == other.p
            && self.observed == other.observed
            && self.x == other.x
            && self.outcome_names == other.outcome_names
            && self.covariate_names == other.covariate_names
            && self.scale_factors == other.scale_factors
            && self.y.iter().zip(&other.y).zip(&self.observed).all(|((a, b), &o)| !o || a == b)
    }
}

/// Serialized form of a [`Dataset`]; the observation indices are rebuilt.
#[derive(Serialize, Deserialize)]
struct DatasetRecord {
    y: Vec<Vec<Option<f64>>>,
    x: Vec<Vec<f64>>,
    outcome_names: Vec<String>,
    covariate_names: Vec<String>,
    scale_factors: Option<Vec<f64>>,
}

impl TryFrom<DatasetRecord> for Dataset {
    type Error = crate::error::Error;
    fn try_from(r: DatasetRecord) -> Result<Self> {
        let mut ds = Dataset::from_rows(&r.y, &r.x, r.outcome_names, r.covariate_names)?;
        ds.scale_factors = r.scale_factors;
        Ok(ds)
    }
}

impl From<Dataset> for DatasetRecord {
    fn from(ds: Dataset) -> Self {
        DatasetRecord {
            y: (0..ds.n).map(|i| (0..ds.m).map(|j| ds.y(i, j)).collect()).collect(),
            x: (0..ds.n).map(|i| ds.x_row(i).to_vec()).collect(),
            outcome_names: ds.outcome_names,
            covariate_names: ds.covariate_names,
            scale_factors: ds.scale_factors,
        }
    }
}

impl Dataset {
    /// Builds a dataset from per-individual rows. `None` marks a missing
    /// outcome. Rows without any observed outcome and all-ones covariate
    /// columns are rejected.
    pub fn from_rows(
        y: &[Vec<Option<f64>>],
        x: &[Vec<f64>],
        outcome_names: Vec<String>,
        covariate_names: Vec<String>,
    ) -> Result<Self> {
        let n = y.len();
        let m = outcome_names.len();
        let p = covariate_names.len();
        if n == 0 {
            bail!(Data, "dataset has no rows");
        }
        if m == 0 {
            bail!(Data, "dataset has no outcome columns");
        }
        if x.len() != n {
            bail!(Dimension, "{n} outcome rows but {} covariate rows", x.len());
        }
        let mut yv = Vec::with_capacity(n * m);
        let mut observed = Vec::with_capacity(n * m);
        let mut xv = Vec::with_capacity(n * p);
        for (i, (yr, xr)) in y.iter().zip(x).enumerate() {
            if yr.len() != m {
                bail!(Dimension, "row {} has {} outcomes, expected {m}", i + 1, yr.len());
            }
            if xr.len() != p {
                bail!(Dimension, "row {} has {} covariates, expected {p}", i + 1, xr.len());
            }
            if yr.iter().all(Option::is_none) {
                bail!(Data, "row {} has no observed outcome", i + 1);
            }
            for (j, cell) in yr.iter().enumerate() {
                match cell {
                    Some(v) if !v.is_finite() => {
                        bail!(Data, "row {}, outcome '{}': non-finite value", i + 1, outcome_names[j])
                    }
                    Some(v) => {
                        yv.push(*v);
                        observed.push(true);
                    }
                    None => {
                        yv.push(f64::NAN);
                        observed.push(false);
                    }
                }
            }
            for (k, v) in xr.iter().enumerate() {
                if !v.is_finite() {
                    bail!(Data, "row {}, covariate '{}': non-finite value", i + 1, covariate_names[k]);
                }
                xv.push(*v);
            }
        }
        for k in 0..p {
            if (0..n).all(|i| xv[i * p + k] == 1.0) {
                bail!(Data, "covariate '{}' is an intercept column; intercepts are part of the model", covariate_names[k]);
            }
        }
        let mut ds = Dataset {
            n,
            m,
            p,
            y: yv,
            observed,
            x: xv,
            outcome_names,
            covariate_names,
            scale_factors: None,
            rows_by_outcome: Vec::new(),
            outcomes_by_row: Vec::new(),
        };
        ds.index();
        Ok(ds)
    }

    fn index(&mut self) {
        self.rows_by_outcome = (0..self.m)
            .map(|j| (0..self.n).filter(|&i| self.observed[i * self.m + j]).collect())
            .collect();
        self.outcomes_by_row = (0..self.n)
            .map(|i| (0..self.m).filter(|&j| self.observed[i * self.m + j]).collect())
            .collect();
    }

    /// Number of individuals.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of outcomes.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of covariates.
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.observed[i * self.m + j]
    }

    pub fn y(&self, i: usize, j: usize) -> Option<f64> {
        self.is_observed(i, j).then(|| self.y[i * self.m + j])
    }

    /// Value of an observed cell. Callers iterate the observation indices,
    /// so a missing cell here is a logic error and yields NaN.
    pub fn y_obs(&self, i: usize, j: usize) -> f64 {
        self.y[i * self.m + j]
    }

    pub fn x_row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    /// Individuals with outcome `j` observed, ascending.
    pub fn rows_observing(&self, j: usize) -> &[usize] {
        &self.rows_by_outcome[j]
    }

    /// Outcomes observed for individual `i`, ascending.
    pub fn outcomes_observed(&self, i: usize) -> &[usize] {
        &self.outcomes_by_row[i]
    }

    pub fn n_obs(&self, j: usize) -> usize {
        self.rows_by_outcome[j].len()
    }

    pub fn total_observed(&self) -> usize {
        self.observed.iter().filter(|o| **o).count()
    }

    pub fn outcome_names(&self) -> &[String] {
        &self.outcome_names
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn scale_factors(&self) -> Option<&[f64]> {
        self.scale_factors.as_deref()
    }

    /// Observed values of outcome `j`.
    pub fn observed_values(&self, j: usize) -> Vec<f64> {
        self.rows_by_outcome[j].iter().map(|&i| self.y_obs(i, j)).collect()
    }

    /// Mean and `n - 1` variance of the observed values of outcome `j`.
    pub fn observed_mean_var(&self, j: usize) -> (f64, f64) {
        mean_var(&self.observed_values(j))
    }

    /// Column means of the covariates.
    pub fn covariate_means(&self) -> Vec<f64> {
        (0..self.p)
            .map(|k| (0..self.n).map(|i| self.x[i * self.p + k]).sum::<f64>() / self.n as f64)
            .collect()
    }

    /// Multiplies each outcome column so that its observed sample standard
    /// deviation equals `target_sd`. Means are not shifted.
    pub fn standardize_outcomes(&self, target_sd: f64) -> Result<Dataset> {
        if !(target_sd > 0.0 && target_sd.is_finite()) {
            bail!(InvalidParameter, "target sd must be positive, got {target_sd}");
        }
        let mut factors = Vec::with_capacity(self.m);
        for j in 0..self.m {
            if self.n_obs(j) < 2 {
                bail!(Data, "outcome '{}' has fewer than two observed values", self.outcome_names[j]);
            }
            let (_, var) = self.observed_mean_var(j);
            if !(var > 0.0) {
                bail!(Data, "outcome '{}' is constant", self.outcome_names[j]);
            }
            factors.push(target_sd / var.sqrt());
        }
        let mut out = self.clone();
        for i in 0..self.n {
            for j in 0..self.m {
                if self.is_observed(i, j) {
                    out.y[i * self.m + j] *= factors[j];
                }
            }
        }
        let previous = self.scale_factors.clone().unwrap_or_else(|| alloc::vec![1.0; self.m]);
        out.scale_factors = Some(factors.iter().zip(&previous).map(|(a, b)| a * b).collect());
        Ok(out)
    }

    /// Dataset made of the given rows, repeats allowed (bootstrap resampling).
    pub fn subset_rows(&self, rows: &[usize]) -> Result<Dataset> {
        if rows.is_empty() {
            bail!(Data, "empty row selection");
        }
        if let Some(r) = rows.iter().find(|r| **r >= self.n) {
            bail!(Dimension, "row {r} out of range for {} rows", self.n);
        }
        let mut out = Dataset {
            n: rows.len(),
            m: self.m,
            p: self.p,
            y: Vec::with_capacity(rows.len() * self.m),
            observed: Vec::with_capacity(rows.len() * self.m),
            x: Vec::with_capacity(rows.len() * self.p),
            outcome_names: self.outcome_names.clone(),
            covariate_names: self.covariate_names.clone(),
            scale_factors: self.scale_factors.clone(),
            rows_by_outcome: Vec::new(),
            outcomes_by_row: Vec::new(),
        };
        for &r in rows {
            out.y.extend_from_slice(&self.y[r * self.m..(r + 1) * self.m]);
            out.observed.extend_from_slice(&self.observed[r * self.m..(r + 1) * self.m]);
            out.x.extend_from_slice(self.x_row(r));
        }
        out.index();
        Ok(out)
    }

    /// Same data with outcome values replaced; the mask must match.
    pub fn with_outcomes(&self, values: &[f64]) -> Result<Dataset> {
        if values.len() != self.n * self.m {
            bail!(Dimension, "expected {} outcome values, got {}", self.n * self.m, values.len());
        }
        let mut out = self.clone();
        for (idx, v) in values.iter().enumerate() {
            if self.observed[idx] {
                if !v.is_finite() {
                    bail!(Data, "non-finite replacement for an observed cell");
                }
                out.y[idx] = *v;
            }
        }
        Ok(out)
    }

    /// Human-readable label for error messages.
    pub fn describe(&self) -> String {
        format!("{} rows x {} outcomes, {} covariates", self.n, self.m, self.p)
    }
}

pub(crate) fn mean_var(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}
