//! VWAIC and VAIC from Monte Carlo draws of the variational approximation.
//!
//! `theta` holds every block of `q` including the latent factors and the
//! mixture weights; the component indicators are summed out of the
//! likelihood. The pointwise unit is the individual:
//! `log p(y_i | theta)` sums over that individual's observed outcomes.
//!
//! With `l_is = log p(y_i | theta_s)` for draws `s = 1..R`:
//!
//! ```text
//! vlppd   = sum_i log mean_s exp(l_is)
//! P_VWAIC = 2 sum_i (log mean_s exp(l_is) - mean_s l_is)
//! VWAIC   = -2 (vlppd - P_VWAIC)
//! P_VAIC  = 2 (log p(y | theta~) - mean_s sum_i l_is)
//! VAIC    = -2 (log p(y | theta~) - P_VAIC)
//! ```
//!
//! where `theta~` is the vector of `q` means.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{bail, Result};
use crate::latent::LatentQState;
use crate::math::linalg::from_rows;
use crate::math::rng::substream;
use crate::math::sampling::{draw_dirichlet, draw_inverse_gamma, draw_mvnormal, draw_normal};
use crate::math::sum::{log_sum_exp, pairwise_sum};
use crate::outcome::OutcomeQState;

/// Draw count used when none is given.
pub const DEFAULT_DRAWS: usize = 10_000;

/// One draw of the outcome-mixture parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeTheta {
    pub mu: Vec<Vec<f64>>,
    pub psi2: Vec<Vec<f64>>,
    pub w: Vec<Vec<f64>>,
    pub lambda: Vec<f64>,
    pub eta: Vec<f64>,
    pub beta: Vec<f64>,
    pub sigma2: f64,
}

/// One draw of the latent-mixture parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentTheta {
    pub nu: Vec<f64>,
    pub lambda: Vec<f64>,
    pub psi2: Vec<f64>,
    pub eta: Vec<f64>,
    pub beta: Vec<Vec<f64>>,
    pub sigma2: Vec<f64>,
    pub w: Vec<f64>,
}

/// A fitted variational state that the criteria can be computed from.
pub trait VariationalFit {
    type Theta;

    /// One independent draw of every block of `q`.
    fn sample_theta<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Self::Theta>;

    /// The vector of `q` means. Inverse-Gamma blocks need shape above 1.
    fn plugin_theta(&self) -> Result<Self::Theta>;

    /// `log p(y_i | theta)` for individual `i`.
    fn pointwise_loglik(theta: &Self::Theta, ds: &Dataset, i: usize) -> f64;
}

fn ln_normal(y: f64, mean: f64, var: f64) -> f64 {
    let d = y - mean;
    -0.5 * (2.0 * PI * var).ln() - 0.5 * d * d / var
}

fn ig_mean(alpha: f64, beta: f64, block: &str) -> Result<f64> {
    if !(alpha > 1.0) {
        bail!(Domain, "{block}: q shape {alpha} must exceed 1 for the plug-in mean to exist");
    }
    Ok(beta / (alpha - 1.0))
}

fn dirichlet_mean(alpha: &[f64]) -> Vec<f64> {
    let total: f64 = alpha.iter().sum();
    alpha.iter().map(|a| a / total).collect()
}

fn draw_weights<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    if alpha.len() == 1 {
        return Ok(vec![1.0]);
    }
    draw_dirichlet(alpha, rng)
}

impl VariationalFit for OutcomeQState {
    type Theta = OutcomeTheta;

    fn sample_theta<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<OutcomeTheta> {
        let mut mu = Vec::with_capacity(self.m());
        let mut psi2 = Vec::with_capacity(self.m());
        let mut w = Vec::with_capacity(self.m());
        let mut lambda = Vec::with_capacity(self.m());
        for (j, o) in self.outcomes.iter().enumerate() {
            let mut mj = Vec::with_capacity(o.components.len());
            let mut pj = Vec::with_capacity(o.components.len());
            for c in &o.components {
                mj.push(draw_normal(c.mu_q_mu, c.sigma2_q_mu, rng)?);
                pj.push(draw_inverse_gamma(c.alpha_q_psi2, c.beta_q_psi2, rng)?);
            }
            mu.push(mj);
            psi2.push(pj);
            w.push(draw_weights(&o.alpha_q_w, rng)?);
            lambda.push(if j == 0 { 1.0 } else { draw_normal(o.mu_q_lambda, o.sigma2_q_lambda, rng)? });
        }
        let eta = (0..self.n())
            .map(|i| draw_normal(self.mu_q_eta[i], self.sigma2_q_eta[i], rng))
            .collect::<Result<Vec<_>>>()?;
        let beta = draw_mvnormal(&self.mu_q_beta, &from_rows(&self.sigma_q_beta)?, rng)?;
        let sigma2 = draw_inverse_gamma(self.alpha_q_sigma2, self.beta_q_sigma2, rng)?;
        Ok(OutcomeTheta { mu, psi2, w, lambda, eta, beta, sigma2 })
    }

    fn plugin_theta(&self) -> Result<OutcomeTheta> {
        let mut psi2 = Vec::with_capacity(self.m());
        for (j, o) in self.outcomes.iter().enumerate() {
            psi2.push(
                o.components
                    .iter()
                    .enumerate()
                    .map(|(h, c)| ig_mean(c.alpha_q_psi2, c.beta_q_psi2, &format!("psi2[{}][{}]", j + 1, h + 1)))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        Ok(OutcomeTheta {
            mu: self.outcomes.iter().map(|o| o.components.iter().map(|c| c.mu_q_mu).collect()).collect(),
            psi2,
            w: self.outcomes.iter().map(|o| dirichlet_mean(&o.alpha_q_w)).collect(),
            lambda: self.outcomes.iter().enumerate().map(|(j, o)| if j == 0 { 1.0 } else { o.mu_q_lambda }).collect(),
            eta: self.mu_q_eta.clone(),
            beta: self.mu_q_beta.clone(),
            sigma2: ig_mean(self.alpha_q_sigma2, self.beta_q_sigma2, "sigma2")?,
        })
    }

    fn pointwise_loglik(t: &OutcomeTheta, ds: &Dataset, i: usize) -> f64 {
        let mut total = 0.0;
        let mut terms = Vec::new();
        for &j in ds.outcomes_observed(i) {
            let y = ds.y_obs(i, j);
            let shift = t.lambda[j] * t.eta[i];
            terms.clear();
            terms.extend(
                t.mu[j].iter().zip(&t.psi2[j]).zip(&t.w[j]).map(|((m, p), w)| w.ln() + ln_normal(y, m + shift, *p)),
            );
            total += log_sum_exp(&terms);
        }
        total
    }
}

impl VariationalFit for LatentQState {
    type Theta = LatentTheta;

    fn sample_theta<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<LatentTheta> {
        let mut nu = Vec::with_capacity(self.m());
        let mut lambda = Vec::with_capacity(self.m());
        let mut psi2 = Vec::with_capacity(self.m());
        for (j, o) in self.outcomes.iter().enumerate() {
            nu.push(draw_normal(o.mu_q_nu, o.sigma2_q_nu, rng)?);
            lambda.push(if j == 0 { 1.0 } else { draw_normal(o.mu_q_lambda, o.sigma2_q_lambda, rng)? });
            psi2.push(draw_inverse_gamma(o.alpha_q_psi2, o.beta_q_psi2, rng)?);
        }
        let eta = (0..self.n())
            .map(|i| draw_normal(self.mu_q_eta[i], self.sigma2_q_eta[i], rng))
            .collect::<Result<Vec<_>>>()?;
        let mut beta = Vec::with_capacity(self.k());
        let mut sigma2 = Vec::with_capacity(self.k());
        for c in &self.components {
            beta.push(draw_mvnormal(&c.mu_q_beta, &from_rows(&c.sigma_q_beta)?, rng)?);
            sigma2.push(draw_inverse_gamma(c.alpha_q_sigma2, c.beta_q_sigma2, rng)?);
        }
        let w = draw_weights(&self.alpha_q_w, rng)?;
        Ok(LatentTheta { nu, lambda, psi2, eta, beta, sigma2, w })
    }

    fn plugin_theta(&self) -> Result<LatentTheta> {
        let psi2 = self
            .outcomes
            .iter()
            .enumerate()
            .map(|(j, o)| ig_mean(o.alpha_q_psi2, o.beta_q_psi2, &format!("psi2[{}]", j + 1)))
            .collect::<Result<Vec<_>>>()?;
        let sigma2 = self
            .components
            .iter()
            .enumerate()
            .map(|(k, c)| ig_mean(c.alpha_q_sigma2, c.beta_q_sigma2, &format!("sigma2[{}]", k + 1)))
            .collect::<Result<Vec<_>>>()?;
        Ok(LatentTheta {
            nu: self.outcomes.iter().map(|o| o.mu_q_nu).collect(),
            lambda: self.outcomes.iter().enumerate().map(|(j, o)| if j == 0 { 1.0 } else { o.mu_q_lambda }).collect(),
            psi2,
            eta: self.mu_q_eta.clone(),
            beta: self.components.iter().map(|c| c.mu_q_beta.clone()).collect(),
            sigma2,
            w: dirichlet_mean(&self.alpha_q_w),
        })
    }

    fn pointwise_loglik(t: &LatentTheta, ds: &Dataset, i: usize) -> f64 {
        ds.outcomes_observed(i)
            .iter()
            .map(|&j| ln_normal(ds.y_obs(i, j), t.nu[j] + t.lambda[j] * t.eta[i], t.psi2[j]))
            .sum()
    }
}

/// `[log p(y_i | theta) for every i]`.
pub fn loglik_row<F: VariationalFit>(theta: &F::Theta, ds: &Dataset) -> Vec<f64> {
    (0..ds.n()).map(|i| F::pointwise_loglik(theta, ds, i)).collect()
}

/// Pointwise log-likelihoods of draw `s`, which comes from stream `s` of `seed`.
pub fn draw_loglik_row<F: VariationalFit>(fit: &F, ds: &Dataset, seed: u64, s: usize) -> Result<Vec<f64>> {
    let mut rng = substream(seed, s as u64);
    let theta = fit.sample_theta(&mut rng)?;
    Ok(loglik_row::<F>(&theta, ds))
}

/// Which unit the pointwise terms belong to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointwiseUnit {
    PerIndividual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriteriaReport {
    pub vlppd: f64,
    pub p_vwaic: f64,
    pub vwaic: f64,
    pub loglik_at_plugin: f64,
    /// `mean_s sum_i l_is`.
    pub mean_loglik: f64,
    pub p_vaic: f64,
    pub vaic: f64,
    /// Monte Carlo standard error of `p_vwaic`.
    pub p_vwaic_se: f64,
    /// Monte Carlo standard error of `p_vaic`.
    pub p_vaic_se: f64,
    pub draws_r: usize,
    pub seed: u64,
    pub pointwise_unit: PointwiseUnit,
}

/// Assembles both criteria from the draw-by-individual log-likelihood
/// matrix `rows[s][i]` and the plug-in row. Sums use a fixed pairwise order.
pub fn criteria_from_rows(rows: &[Vec<f64>], plugin_row: &[f64], seed: u64) -> Result<CriteriaReport> {
    let r = rows.len();
    if r < 2 {
        bail!(InvalidParameter, "at least 2 draws are needed, got {r}");
    }
    let n = plugin_row.len();
    if rows.iter().any(|row| row.len() != n) {
        bail!(Dimension, "every draw needs {n} pointwise terms");
    }
    let ln_r = (r as f64).ln();
    let mut col = vec![0.0; r];
    let mut lme = vec![0.0; n];
    let mut mean_l = vec![0.0; n];
    for i in 0..n {
        for (s, row) in rows.iter().enumerate() {
            col[s] = row[i];
        }
        lme[i] = log_sum_exp(&col) - ln_r;
        mean_l[i] = pairwise_sum(&col) / r as f64;
    }
    let vlppd = pairwise_sum(&lme);
    let gaps: Vec<f64> = lme.iter().zip(&mean_l).map(|(a, b)| a - b).collect();
    let p_vwaic = 2.0 * pairwise_sum(&gaps);
    let totals: Vec<f64> = rows.iter().map(|row| pairwise_sum(row)).collect();
    let mean_loglik = pairwise_sum(&totals) / r as f64;
    let loglik_at_plugin = pairwise_sum(plugin_row);
    let p_vaic = 2.0 * (loglik_at_plugin - mean_loglik);

    // Delta-method influence of draw s on P_VWAIC.
    let influence: Vec<f64> = rows
        .iter()
        .map(|row| {
            let terms: Vec<f64> =
                (0..n).map(|i| ((row[i] - lme[i]).exp() - 1.0) - (row[i] - mean_l[i])).collect();
            pairwise_sum(&terms)
        })
        .collect();
    let p_vwaic_se = 2.0 * sample_sd(&influence) / (r as f64).sqrt();
    let p_vaic_se = 2.0 * sample_sd(&totals) / (r as f64).sqrt();

    Ok(CriteriaReport {
        vlppd,
        p_vwaic,
        vwaic: -2.0 * (vlppd - p_vwaic),
        loglik_at_plugin,
        mean_loglik,
        p_vaic,
        vaic: -2.0 * (loglik_at_plugin - p_vaic),
        p_vwaic_se,
        p_vaic_se,
        draws_r: r,
        seed,
        pointwise_unit: PointwiseUnit::PerIndividual,
    })
}

fn sample_sd(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = pairwise_sum(values) / n;
    let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    (pairwise_sum(&dev) / (n - 1.0)).sqrt()
}

/// Both criteria from `draws` draws, computed sequentially.
pub fn criteria<F: VariationalFit>(fit: &F, ds: &Dataset, draws: usize, seed: u64) -> Result<CriteriaReport> {
    if draws < 2 {
        bail!(InvalidParameter, "at least 2 draws are needed, got {draws}");
    }
    let rows = (0..draws).map(|s| draw_loglik_row(fit, ds, seed, s)).collect::<Result<Vec<_>>>()?;
    let plugin = loglik_row::<F>(&fit.plugin_theta()?, ds);
    criteria_from_rows(&rows, &plugin, seed)
}
