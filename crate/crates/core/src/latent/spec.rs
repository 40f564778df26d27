use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{bail, Result};
use crate::outcome::spec::{check_beta_prior, WEAK_PSI2_RATE, WEAK_PSI2_SHAPE};

/// Model structure and prior hyperparameters of the latent-mixture model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatentMixtureSpec {
    /// Mixture components on the latent factor.
    pub k: usize,
    pub mu_nu: f64,
    pub sigma2_nu: f64,
    pub mu_lambda: f64,
    pub sigma2_lambda: f64,
    pub alpha_psi2: f64,
    pub beta_psi2: f64,
    pub alpha_sigma2: f64,
    pub beta_sigma2: f64,
    pub alpha_w: f64,
    /// Prior shared by every `beta_k`.
    pub mu_beta: Vec<f64>,
    pub sigma_beta: Vec<Vec<f64>>,
    /// When set, `nu_1` is held at this value in addition to `lambda_1 = 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pin_nu1: Option<f64>,
}

impl LatentMixtureSpec {
    /// Weakly informative priors with `alpha_w = 1`: `nu_j ~ N(0, 100)`,
    /// `lambda ~ N(1, 1)`, `psi2 ~ IG(2.390625, 8.69140625)`,
    /// `sigma2_k ~ IG(1, 1)`, `beta_k ~ N(0, 100 I)`.
    pub fn new(k: usize, p: usize) -> Self {
        Self {
            k,
            mu_nu: 0.0,
            sigma2_nu: 100.0,
            mu_lambda: 1.0,
            sigma2_lambda: 1.0,
            alpha_psi2: WEAK_PSI2_SHAPE,
            beta_psi2: WEAK_PSI2_RATE,
            alpha_sigma2: 1.0,
            beta_sigma2: 1.0,
            alpha_w: 1.0,
            mu_beta: vec![0.0; p],
            sigma_beta: (0..p).map(|a| (0..p).map(|b| if a == b { 100.0 } else { 0.0 }).collect()).collect(),
            pin_nu1: None,
        }
    }

    /// [`Self::new`] with `alpha_w = 10`, matching the outcome-model
    /// simulation prior.
    pub fn simulation_prior(k: usize, p: usize) -> Self {
        Self { alpha_w: 10.0, ..Self::new(k, p) }
    }

    pub fn p(&self) -> usize {
        self.mu_beta.len()
    }

    pub fn validate(&self, ds: &Dataset) -> Result<()> {
        self.validate_self()?;
        if ds.p() != self.p() {
            bail!(Dimension, "spec has {} covariates, data has {}", self.p(), ds.p());
        }
        Ok(())
    }

    pub fn validate_self(&self) -> Result<()> {
        if self.k == 0 {
            bail!(InvalidParameter, "K must be at least 1");
        }
        for (name, v) in [
            ("sigma2_nu", self.sigma2_nu),
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
        if !self.mu_nu.is_finite() || !self.mu_lambda.is_finite() {
            bail!(InvalidParameter, "mu_nu and mu_lambda must be finite");
        }
        if self.pin_nu1.is_some_and(|v| !v.is_finite()) {
            bail!(InvalidParameter, "pin_nu1 must be finite");
        }
        check_beta_prior(&self.mu_beta, &self.sigma_beta)
    }
}
