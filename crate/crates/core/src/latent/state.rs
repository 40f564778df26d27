use alloc::boxed::Box;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math::linalg::dot;

/// Variational factors attached to outcome `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementQ {
    pub mu_q_nu: f64,
    pub sigma2_q_nu: f64,
    pub mu_q_nu2: f64,
    /// Fixed at `N_obs(j) / 2 + alpha_psi2`.
    pub alpha_q_psi2: f64,
    pub beta_q_psi2: f64,
    pub mu_q_inv_psi2: f64,
    /// Fixed at `(1, 0, 1)` for the first outcome.
    pub mu_q_lambda: f64,
    pub sigma2_q_lambda: f64,
    pub mu_q_lambda2: f64,
}

/// Variational factors of latent mixture component `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatentComponentQ {
    pub mu_q_beta: Vec<f64>,
    pub sigma_q_beta: Vec<Vec<f64>>,
    pub alpha_q_sigma2: f64,
    pub beta_q_sigma2: f64,
    pub mu_q_inv_sigma2: f64,
    pub mu_q_log_sigma2: f64,
}

/// Full variational state of the latent-mixture model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatentQState {
    pub outcomes: Vec<MeasurementQ>,
    pub mu_q_eta: Vec<f64>,
    pub sigma2_q_eta: Vec<f64>,
    pub mu_q_eta2: Vec<f64>,
    /// `mu_q_a[i]` is the responsibility vector of individual `i`.
    pub mu_q_a: Vec<Vec<f64>>,
    pub components: Vec<LatentComponentQ>,
    pub alpha_q_w: Vec<f64>,
    pub mu_q_log_w: Vec<f64>,
}

/// Starting point of a latent-mixture fit.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum LatentInit {
    /// Fit the single-component model, then a mixture of regressions of the
    /// fitted factor means on the covariates; its coefficients, variances and
    /// memberships seed the components.
    #[default]
    MixtureRegression,
    /// Data-driven defaults only: factor scores from standardized row means
    /// and memberships split by score rank.
    Spread,
    /// Continue from an earlier state.
    Warm(Box<LatentQState>),
}

impl LatentQState {
    pub fn n(&self) -> usize {
        self.mu_q_eta.len()
    }

    pub fn m(&self) -> usize {
        self.outcomes.len()
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    /// Every stored scalar, in a fixed order, for the convergence metric.
    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        for o in &self.outcomes {
            out.extend_from_slice(&[
                o.mu_q_nu,
                o.sigma2_q_nu,
                o.mu_q_nu2,
                o.alpha_q_psi2,
                o.beta_q_psi2,
                o.mu_q_inv_psi2,
                o.mu_q_lambda,
                o.sigma2_q_lambda,
                o.mu_q_lambda2,
            ]);
        }
        out.extend_from_slice(&self.mu_q_eta);
        out.extend_from_slice(&self.sigma2_q_eta);
        out.extend_from_slice(&self.mu_q_eta2);
        for a in &self.mu_q_a {
            out.extend_from_slice(a);
        }
        for c in &self.components {
            out.extend_from_slice(&c.mu_q_beta);
            for row in &c.sigma_q_beta {
                out.extend_from_slice(row);
            }
            out.extend_from_slice(&[c.alpha_q_sigma2, c.beta_q_sigma2, c.mu_q_inv_sigma2, c.mu_q_log_sigma2]);
        }
        out.extend_from_slice(&self.alpha_q_w);
        out.extend_from_slice(&self.mu_q_log_w);
    }

    /// Copy with components ordered by `x_bar' mu_q(beta_k)` ascending.
    pub fn sorted_by_slope(&self, x_bar: &[f64]) -> LatentQState {
        let mut order: Vec<usize> = (0..self.k()).collect();
        let key = |k: usize| dot(x_bar, &self.components[k].mu_q_beta);
        order.sort_by(|&a, &b| key(a).partial_cmp(&key(b)).unwrap_or(core::cmp::Ordering::Equal).then(a.cmp(&b)));
        self.permuted(&order)
    }

    /// Copy whose component `k` is component `order[k]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> LatentQState {
        let mut out = self.clone();
        out.components = order.iter().map(|&k| self.components[k].clone()).collect();
        out.alpha_q_w = order.iter().map(|&k| self.alpha_q_w[k]).collect();
        out.mu_q_log_w = order.iter().map(|&k| self.mu_q_log_w[k]).collect();
        out.mu_q_a = self.mu_q_a.iter().map(|a| order.iter().map(|&k| a[k]).collect()).collect();
        out
    }
}
