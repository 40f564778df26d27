use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{bail, Result};
use crate::math::linalg::{from_rows, is_spd};

/// Inverse-Gamma prior on `psi2` with mean 6.25 and variance 100.
pub(crate) const WEAK_PSI2_SHAPE: f64 = 2.390625;
pub(crate) const WEAK_PSI2_RATE: f64 = 8.69140625;

/// Model structure and prior hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeMixtureSpec {
    /// Mixture components per outcome.
    pub h: Vec<usize>,
    pub mu_lambda: f64,
    pub sigma2_lambda: f64,
    /// Prior means of the intercepts, `mu_mu[j][h]`.
    pub mu_mu: Vec<Vec<f64>>,
    /// Prior variances of the intercepts, `sigma2_mu[j][h]`.
    pub sigma2_mu: Vec<Vec<f64>>,
    pub alpha_psi2: f64,
    pub beta_psi2: f64,
    pub alpha_sigma2: f64,
    pub beta_sigma2: f64,
    /// Symmetric Dirichlet concentration for every `w_j`.
    pub alpha_w: f64,
    pub mu_beta: Vec<f64>,
    pub sigma_beta: Vec<Vec<f64>>,
}

impl OutcomeMixtureSpec {
    /// Weakly informative priors with `alpha_w = 1`: `lambda ~ N(1, 1)`,
    /// `mu_jh ~ N(0, 100)`, `psi2 ~ IG(2.390625, 8.69140625)`,
    /// `sigma2 ~ IG(1, 1)`, `beta ~ N(0, 100 I)`.
    pub fn new(h: Vec<usize>, p: usize) -> Self {
        let shared = |v: f64| h.iter().map(|&hj| vec![v; hj]).collect::<Vec<_>>();
        Self {
            mu_mu: shared(0.0),
            sigma2_mu: shared(100.0),
            h,
            mu_lambda: 1.0,
            sigma2_lambda: 1.0,
            alpha_psi2: WEAK_PSI2_SHAPE,
            beta_psi2: WEAK_PSI2_RATE,
            alpha_sigma2: 1.0,
            beta_sigma2: 1.0,
            alpha_w: 1.0,
            mu_beta: vec![0.0; p],
            sigma_beta: (0..p).map(|k| (0..p).map(|l| if k == l { 100.0 } else { 0.0 }).collect()).collect(),
        }
    }

    /// The simulation-study prior: [`Self::new`] with `alpha_w = 10`.
    pub fn simulation_prior(h: Vec<usize>, p: usize) -> Self {
        Self { alpha_w: 10.0, ..Self::new(h, p) }
    }

    /// Same `(mean, variance)` intercept prior for every component.
    pub fn with_shared_intercept_prior(mut self, mean: f64, variance: f64) -> Self {
        self.mu_mu = self.h.iter().map(|&hj| vec![mean; hj]).collect();
        self.sigma2_mu = self.h.iter().map(|&hj| vec![variance; hj]).collect();
        self
    }

    pub fn m(&self) -> usize {
        self.h.len()
    }

    pub fn p(&self) -> usize {
        self.mu_beta.len()
    }

    /// Checks hyperparameters and, when given, agreement with a dataset.
    pub fn validate(&self, ds: &Dataset) -> Result<()> {
        self.validate_self()?;
        if ds.m() != self.m() {
            bail!(Dimension, "spec has {} outcomes, data has {}", self.m(), ds.m());
        }
        if ds.p() != self.p() {
            bail!(Dimension, "spec has {} covariates, data has {}", self.p(), ds.p());
        }
        Ok(())
    }

    pub fn validate_self(&self) -> Result<()> {
        if self.h.is_empty() {
            bail!(InvalidParameter, "h: at least one outcome is required");
        }
        if let Some(j) = self.h.iter().position(|&hj| hj == 0) {
            bail!(InvalidParameter, "h: outcome {} has zero components", j + 1);
        }
        for (name, v) in [
            ("sigma2_lambda", self.sigma2_lambda),
            ("alpha_psi2", self.alpha_psi2),
            ("beta_psi2", self.beta_psi2),
            ("alpha_sigma2", self.alpha_sigma2),
            ("beta_sigma2", self.beta_sigma2),
            ("alpha_w", self.alpha_w),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                bail!(InvalidParameter, "{name} must be positive, got {v}");
            }
        }
        if !self.mu_lambda.is_finite() {
            bail!(InvalidParameter, "mu_lambda must be finite");
        }
        for (name, table) in [("mu_mu", &self.mu_mu), ("sigma2_mu", &self.sigma2_mu)] {
            if table.len() != self.m() {
                bail!(Dimension, "{name} has {} rows for {} outcomes", table.len(), self.m());
            }
            for (j, row) in table.iter().enumerate() {
                if row.len() != self.h[j] {
                    bail!(Dimension, "{name}[{}] has {} entries for {} components", j + 1, row.len(), self.h[j]);
                }
            }
        }
        if self.mu_mu.iter().flatten().any(|v| !v.is_finite()) {
            bail!(InvalidParameter, "mu_mu entries must be finite");
        }
        if self.sigma2_mu.iter().flatten().any(|v| !(*v > 0.0 && v.is_finite())) {
            bail!(InvalidParameter, "sigma2_mu entries must be positive");
        }
        check_beta_prior(&self.mu_beta, &self.sigma_beta)
    }
}

pub(crate) fn check_beta_prior(mu_beta: &[f64], sigma_beta: &[Vec<f64>]) -> Result<()> {
    let p = mu_beta.len();
    if sigma_beta.len() != p || sigma_beta.iter().any(|r| r.len() != p) {
        bail!(Dimension, "sigma_beta must be {p}x{p}");
    }
    let s = from_rows(sigma_beta)?;
    if (0..p).any(|k| (0..k).any(|l| (s[(k, l)] - s[(l, k)]).abs() > 1e-12 * (1.0 + s[(k, l)].abs()))) {
        bail!(InvalidParameter, "sigma_beta must be symmetric");
    }
    if !is_spd(&s) {
        bail!(InvalidParameter, "sigma_beta must be positive definite");
    }
    if mu_beta.iter().any(|v| !v.is_finite()) {
        bail!(InvalidParameter, "mu_beta entries must be finite");
    }
    Ok(())
}
