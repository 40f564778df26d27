//! JSON configuration files.
//!
//! Every file carries `"schema_version": 1` and unknown keys are rejected.
//! Hyperparameters have no defaults here: a model config must spell out
//! every prior the chosen model uses.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use mixsem_core::init::{mixreg_em, EmOptions};
use mixsem_core::latent::LatentInit;
use mixsem_core::math::derive_seed;
use mixsem_core::sim::SimulationTruth;
use mixsem_core::{Dataset, LatentMixtureSpec, OutcomeMixtureSpec};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_json, Columns};

pub const SCHEMA_VERSION: u32 = 1;

/// The two model families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    OutcomeMixture,
    LatentMixture,
}

impl ModelKind {
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::OutcomeMixture => "outcome-mixture",
            ModelKind::LatentMixture => "latent-mixture",
        }
    }
}

/// A per-component table or one value shared by every component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerComponent {
    Shared(f64),
    Table(Vec<Vec<f64>>),
}

/// Prior means of the outcome intercepts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InterceptMeans {
    Shared(f64),
    Table(Vec<Vec<f64>>),
    /// `"mixture_regression"`: the sorted intercepts of an `H_j`-component
    /// mixture of regressions of outcome `j` on the covariates.
    Rule(String),
}

/// `sigma_beta` as a full matrix or a multiple of the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Covariance {
    Diagonal(f64),
    Matrix(Vec<Vec<f64>>),
}

/// How a latent-mixture fit is started.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatentStart {
    #[default]
    MixtureRegression,
    Spread,
}

/// Prior hyperparameters of either model. Keys that only one model uses
/// may be omitted when fitting the other.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Priors {
    pub mu_lambda: Option<f64>,
    pub sigma2_lambda: Option<f64>,
    pub alpha_psi2: Option<f64>,
    pub beta_psi2: Option<f64>,
    pub alpha_sigma2: Option<f64>,
    pub beta_sigma2: Option<f64>,
    pub alpha_w: Option<f64>,
    pub mu_beta: Option<Vec<f64>>,
    pub sigma_beta: Option<Covariance>,
    /// Components per outcome (outcome-mixture).
    pub h: Option<Vec<usize>>,
    pub mu_mu: Option<InterceptMeans>,
    pub sigma2_mu: Option<PerComponent>,
    /// Components on the latent factor (latent-mixture).
    #[serde(rename = "K")]
    pub k: Option<usize>,
    pub mu_nu: Option<f64>,
    pub sigma2_nu: Option<f64>,
    /// Overrides `alpha_w` for the latent-mixture model.
    pub latent_alpha_w: Option<f64>,
    pub pin_nu1: Option<f64>,
    pub latent_init: Option<LatentStart>,
}

/// Model configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub columns: Columns,
    pub priors: Priors,
}

/// Generating parameters for `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub schema_version: u32,
    pub truth: SimulationTruth,
}

fn check_version(path: &Path, v: u32) -> Result<()> {
    if v != SCHEMA_VERSION {
        return Err(Error::Config {
            path: path.to_path_buf(),
            message: format!("key \"schema_version\": expected {SCHEMA_VERSION}, got {v}"),
        });
    }
    Ok(())
}

pub fn load_model_config(path: &Path) -> Result<ModelConfig> {
    let c: ModelConfig = read_json(path)?;
    check_version(path, c.schema_version)?;
    Ok(c)
}

pub fn load_simulation_config(path: &Path) -> Result<SimulationConfig> {
    let c: SimulationConfig = read_json(path)?;
    check_version(path, c.schema_version)?;
    c.truth.validate().map_err(|e| Error::Config { path: path.to_path_buf(), message: format!("key \"truth\": {e}") })?;
    Ok(c)
}

/// Resolves [`Priors`] into model specs, naming the source file in errors.
pub struct PriorResolver<'a> {
    pub priors: &'a Priors,
    pub source: PathBuf,
}

impl<'a> PriorResolver<'a> {
    pub fn new(priors: &'a Priors, source: impl Into<PathBuf>) -> Self {
        Self { priors, source: source.into() }
    }

    fn err(&self, key: &str, message: impl std::fmt::Display) -> Error {
        Error::Config { path: self.source.clone(), message: format!("key \"{key}\": {message}") }
    }

    fn need<T: Clone>(&self, key: &str, v: &Option<T>) -> Result<T> {
        v.clone().ok_or_else(|| self.err(key, "missing"))
    }

    fn sigma_beta(&self, p: usize) -> Result<Vec<Vec<f64>>> {
        match self.need("sigma_beta", &self.priors.sigma_beta)? {
            Covariance::Diagonal(v) => Ok((0..p).map(|a| (0..p).map(|b| if a == b { v } else { 0.0 }).collect()).collect()),
            Covariance::Matrix(m) => Ok(m),
        }
    }

    fn per_component(v: PerComponent, h: &[usize]) -> Vec<Vec<f64>> {
        match v {
            PerComponent::Shared(s) => h.iter().map(|&n| vec![s; n]).collect(),
            PerComponent::Table(t) => t,
        }
    }

    /// Outcome-mixture spec for `ds`. The `mixture_regression` intercept
    /// rule runs EM on the data with seeds derived from `seed`.
    pub fn outcome_spec(&self, ds: &Dataset, seed: u64) -> Result<OutcomeMixtureSpec> {
        let p = &self.priors;
        let h = self.need("h", &p.h)?;
        if h.len() != ds.m() {
            return Err(self.err("h", format!("{} entries for {} outcome columns", h.len(), ds.m())));
        }
        let mu_mu = match self.need("mu_mu", &p.mu_mu)? {
            InterceptMeans::Shared(s) => h.iter().map(|&n| vec![s; n]).collect(),
            InterceptMeans::Table(t) => t,
            InterceptMeans::Rule(r) if r == "mixture_regression" => mixture_regression_intercepts(ds, &h, seed)?,
            InterceptMeans::Rule(r) => {
                return Err(self.err("mu_mu", format!("unknown rule '{r}', expected a number, a table or \"mixture_regression\"")))
            }
        };
        let sigma2_mu = Self::per_component(self.need("sigma2_mu", &p.sigma2_mu)?, &h);
        let spec = OutcomeMixtureSpec {
            mu_lambda: self.need("mu_lambda", &p.mu_lambda)?,
            sigma2_lambda: self.need("sigma2_lambda", &p.sigma2_lambda)?,
            mu_mu,
            sigma2_mu,
            alpha_psi2: self.need("alpha_psi2", &p.alpha_psi2)?,
            beta_psi2: self.need("beta_psi2", &p.beta_psi2)?,
            alpha_sigma2: self.need("alpha_sigma2", &p.alpha_sigma2)?,
            beta_sigma2: self.need("beta_sigma2", &p.beta_sigma2)?,
            alpha_w: self.need("alpha_w", &p.alpha_w)?,
            mu_beta: self.need("mu_beta", &p.mu_beta)?,
            sigma_beta: self.sigma_beta(ds.p())?,
            h,
        };
        spec.validate(ds).map_err(|e| self.err("priors", e))?;
        Ok(spec)
    }

    pub fn latent_spec(&self, ds: &Dataset) -> Result<LatentMixtureSpec> {
        let p = &self.priors;
        let k = self.need("K", &p.k)?;
        let alpha_w = match p.latent_alpha_w {
            Some(a) => a,
            None => self.need("alpha_w", &p.alpha_w)?,
        };
        let spec = LatentMixtureSpec {
            k,
            mu_nu: self.need("mu_nu", &p.mu_nu)?,
            sigma2_nu: self.need("sigma2_nu", &p.sigma2_nu)?,
            mu_lambda: self.need("mu_lambda", &p.mu_lambda)?,
            sigma2_lambda: self.need("sigma2_lambda", &p.sigma2_lambda)?,
            alpha_psi2: self.need("alpha_psi2", &p.alpha_psi2)?,
            beta_psi2: self.need("beta_psi2", &p.beta_psi2)?,
            alpha_sigma2: self.need("alpha_sigma2", &p.alpha_sigma2)?,
            beta_sigma2: self.need("beta_sigma2", &p.beta_sigma2)?,
            alpha_w,
            mu_beta: self.need("mu_beta", &p.mu_beta)?,
            sigma_beta: self.sigma_beta(ds.p())?,
            pin_nu1: p.pin_nu1,
        };
        spec.validate(ds).map_err(|e| self.err("priors", e))?;
        Ok(spec)
    }

    pub fn latent_init(&self) -> LatentInit {
        match self.priors.latent_init.unwrap_or_default() {
            LatentStart::MixtureRegression => LatentInit::MixtureRegression,
            LatentStart::Spread => LatentInit::Spread,
        }
    }
}

/// Sorted intercepts of an `h[j]`-component mixture of regressions of each
/// outcome on the covariates, over that outcome's observed rows.
pub fn mixture_regression_intercepts(ds: &Dataset, h: &[usize], seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(ds.m());
    for (j, &hj) in h.iter().enumerate() {
        let rows = ds.rows_observing(j);
        let y: Vec<f64> = rows.iter().map(|&i| ds.y_obs(i, j)).collect();
        let x: Vec<Vec<f64>> = rows.iter().map(|&i| ds.x_row(i).to_vec()).collect();
        let fit = mixreg_em(&y, &x, hj, true, &EmOptions::default(), derive_seed(seed, j as u64))
            .map_err(|e| Error::Invalid(format!("mixture regression for outcome '{}': {e}", ds.outcome_names()[j])))?;
        let mut intercepts = fit.intercepts;
        intercepts.sort_by(f64::total_cmp);
        out.push(intercepts);
    }
    Ok(out)
}
