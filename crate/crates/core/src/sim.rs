//! Synthetic data from the outcome-mixture model, plus the tallies used to
//! summarize repeated fits against a known truth.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{bail, Result};
use crate::math::linalg::dot;
use crate::math::rng::substream;
use crate::math::sampling::{draw_categorical, draw_normal};

/// How one covariate is generated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum CovariateLaw {
    Normal { mean: f64, variance: f64 },
    Uniform { low: f64, high: f64 },
}

impl CovariateLaw {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        match *self {
            CovariateLaw::Normal { mean, variance } => draw_normal(mean, variance, rng),
            CovariateLaw::Uniform { low, high } => Ok(low + (high - low) * rng.random::<f64>()),
        }
    }

    fn check(&self) -> Result<()> {
        match *self {
            CovariateLaw::Normal { mean, variance } if mean.is_finite() && variance >= 0.0 && variance.is_finite() => Ok(()),
            CovariateLaw::Uniform { low, high } if low.is_finite() && high.is_finite() && low < high => Ok(()),
            other => bail!(InvalidParameter, "invalid covariate law {other:?}"),
        }
    }
}

/// Generating parameters of the outcome-mixture model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationTruth {
    pub beta: Vec<f64>,
    pub lambda: Vec<f64>,
    /// `mu[j][h]`; the number of entries per outcome sets `H_j`.
    pub mu: Vec<Vec<f64>>,
    pub psi2: Vec<Vec<f64>>,
    pub w: Vec<Vec<f64>>,
    pub sigma2: f64,
    pub covariates: Vec<CovariateLaw>,
}

impl Default for SimulationTruth {
    /// Four outcomes with `H = (1, 2, 2, 1)`, `beta = (1, 2)`,
    /// `lambda = (1, 0.8, 0.5, 0.2)`, `x1 ~ N(3, 4)`, `x2 ~ U(0, 5)`.
    fn default() -> Self {
        Self {
            beta: vec![1.0, 2.0],
            lambda: vec![1.0, 0.8, 0.5, 0.2],
            mu: vec![vec![0.0], vec![-5.0, 5.0], vec![-4.0, 6.0], vec![2.0]],
            psi2: vec![vec![5.0], vec![3.5, 2.5], vec![5.0, 4.0], vec![1.0]],
            w: vec![vec![1.0], vec![0.4, 0.6], vec![0.5, 0.5], vec![1.0]],
            sigma2: 1.0,
            covariates: vec![
                CovariateLaw::Normal { mean: 3.0, variance: 4.0 },
                CovariateLaw::Uniform { low: 0.0, high: 5.0 },
            ],
        }
    }
}

impl SimulationTruth {
    pub fn m(&self) -> usize {
        self.lambda.len()
    }

    pub fn p(&self) -> usize {
        self.beta.len()
    }

    pub fn h(&self) -> Vec<usize> {
        self.mu.iter().map(Vec::len).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.m();
        if m == 0 {
            bail!(InvalidParameter, "lambda: at least one outcome is required");
        }
        if self.lambda[0] != 1.0 {
            bail!(InvalidParameter, "lambda: the first loading must be 1");
        }
        if self.covariates.len() != self.p() {
            bail!(Dimension, "beta has {} entries, covariates has {}", self.p(), self.covariates.len());
        }
        for (name, t) in [("mu", &self.mu), ("psi2", &self.psi2), ("w", &self.w)] {
            if t.len() != m {
                bail!(Dimension, "{name} has {} rows for {m} outcomes", t.len());
            }
        }
        for j in 0..m {
            let h = self.mu[j].len();
            if h == 0 || self.psi2[j].len() != h || self.w[j].len() != h {
                bail!(Dimension, "outcome {} needs matching non-empty mu, psi2 and w", j + 1);
            }
            if self.psi2[j].iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                bail!(InvalidParameter, "psi2[{}] must be non-negative", j + 1);
            }
            let total: f64 = self.w[j].iter().sum();
            if self.w[j].iter().any(|v| !(*v >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                bail!(InvalidParameter, "w[{}] must lie on the simplex", j + 1);
            }
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            bail!(InvalidParameter, "sigma2 must be non-negative");
        }
        if self.beta.iter().chain(&self.lambda).chain(self.mu.iter().flatten()).any(|v| !v.is_finite()) {
            bail!(InvalidParameter, "beta, lambda and mu must be finite");
        }
        for c in &self.covariates {
            c.check()?;
        }
        Ok(())
    }
}

/// One simulated dataset with the unobserved quantities that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulated {
    pub dataset: Dataset,
    pub eta: Vec<f64>,
    /// Drawn mixture component of every cell, observed or not.
    pub components: Vec<Vec<usize>>,
}

/// Draws `n` individuals. Each cell is then hidden with probability
/// `missing_rate`; a row left with nothing observed has its mask redrawn.
pub fn simulate(truth: &SimulationTruth, n: usize, seed: u64, missing_rate: f64) -> Result<Simulated> {
    truth.validate()?;
    if n == 0 {
        bail!(InvalidParameter, "n must be at least 1");
    }
    if !(0.0..1.0).contains(&missing_rate) {
        bail!(InvalidParameter, "missing_rate must lie in [0, 1), got {missing_rate}");
    }
    let mut rng = substream(seed, 0);
    let m = truth.m();
    let mut x = Vec::with_capacity(n);
    let mut eta = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut components = Vec::with_capacity(n);
    for _ in 0..n {
        let xi = truth.covariates.iter().map(|c| c.draw(&mut rng)).collect::<Result<Vec<_>>>()?;
        let e = draw_normal(dot(&xi, &truth.beta), truth.sigma2, &mut rng)?;
        let mut row = Vec::with_capacity(m);
        let mut labels = Vec::with_capacity(m);
        for j in 0..m {
            let h = draw_categorical(&truth.w[j], &mut rng)?;
            row.push(draw_normal(truth.mu[j][h] + truth.lambda[j] * e, truth.psi2[j][h], &mut rng)?);
            labels.push(h);
        }
        x.push(xi);
        eta.push(e);
        y.push(row);
        components.push(labels);
    }
    let mut cells: Vec<Vec<Option<f64>>> = Vec::with_capacity(n);
    for row in &y {
        let masked = loop {
            let r: Vec<Option<f64>> =
                row.iter().map(|&v| if missing_rate > 0.0 && rng.random::<f64>() < missing_rate { None } else { Some(v) }).collect();
            if r.iter().any(Option::is_some) {
                break r;
            }
        };
        cells.push(masked);
    }
    let outcome_names: Vec<String> = (1..=m).map(|j| format!("y{j}")).collect();
    let covariate_names: Vec<String> = (1..=truth.p()).map(|k| format!("x{k}")).collect();
    let dataset = Dataset::from_rows(&cells, &x, outcome_names, covariate_names)?;
    Ok(Simulated { dataset, eta, components })
}

/// Fraction of intervals containing `truth`.
pub fn coverage(intervals: &[(f64, f64)], truth: f64) -> f64 {
    if intervals.is_empty() {
        return f64::NAN;
    }
    intervals.iter().filter(|(lo, hi)| *lo <= truth && truth <= *hi).count() as f64 / intervals.len() as f64
}

/// Mean squared error of `estimates` around `truth`.
pub fn mse(estimates: &[f64], truth: f64) -> f64 {
    if estimates.is_empty() {
        return f64::NAN;
    }
    estimates.iter().map(|e| (e - truth) * (e - truth)).sum::<f64>() / estimates.len() as f64
}
