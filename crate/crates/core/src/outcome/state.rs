use alloc::boxed::Box;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Variational factors of one mixture component `(j, h)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentQ {
    pub mu_q_mu: f64,
    pub sigma2_q_mu: f64,
    pub mu_q_mu2: f64,
    pub alpha_q_psi2: f64,
    pub beta_q_psi2: f64,
    pub mu_q_inv_psi2: f64,
    pub mu_q_log_psi2: f64,
}

/// Variational factors attached to outcome `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeBlockQ {
    pub components: Vec<ComponentQ>,
    pub alpha_q_w: Vec<f64>,
    pub mu_q_log_w: Vec<f64>,
    /// Fixed at `(1, 0, 1)` for the first outcome.
    pub mu_q_lambda: f64,
    pub sigma2_q_lambda: f64,
    pub mu_q_lambda2: f64,
}

/// Full variational state of the outcome-mixture model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeQState {
    pub outcomes: Vec<OutcomeBlockQ>,
    pub mu_q_eta: Vec<f64>,
    pub sigma2_q_eta: Vec<f64>,
    pub mu_q_eta2: Vec<f64>,
    /// `mu_q_a[i][j]` is the responsibility vector of cell `(i, j)`;
    /// empty when the cell is unobserved.
    pub mu_q_a: Vec<Vec<Vec<f64>>>,
    pub mu_q_beta: Vec<f64>,
    pub sigma_q_beta: Vec<Vec<f64>>,
    pub alpha_q_sigma2: f64,
    pub beta_q_sigma2: f64,
    pub mu_q_inv_sigma2: f64,
}

/// Starting point of a fit.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum OutcomeInit {
    /// Data-driven defaults; intercepts spread over `mean +- sd` to break
    /// label symmetry.
    #[default]
    Default,
    /// Continue from an earlier state, e.g. a previous fit.
    Warm(Box<OutcomeQState>),
}

impl OutcomeQState {
    pub fn n(&self) -> usize {
        self.mu_q_eta.len()
    }

    pub fn m(&self) -> usize {
        self.outcomes.len()
    }

    /// Every stored scalar, in a fixed order, for the convergence metric.
    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        for o in &self.outcomes {
            for c in &o.components {
                out.extend_from_slice(&[
                    c.mu_q_mu,
                    c.sigma2_q_mu,
                    c.mu_q_mu2,
                    c.alpha_q_psi2,
                    c.beta_q_psi2,
                    c.mu_q_inv_psi2,
                    c.mu_q_log_psi2,
                ]);
            }
            out.extend_from_slice(&o.alpha_q_w);
            out.extend_from_slice(&o.mu_q_log_w);
            out.extend_from_slice(&[o.mu_q_lambda, o.sigma2_q_lambda, o.mu_q_lambda2]);
        }
        out.extend_from_slice(&self.mu_q_eta);
        out.extend_from_slice(&self.sigma2_q_eta);
        out.extend_from_slice(&self.mu_q_eta2);
        for row in &self.mu_q_a {
            for cell in row {
                out.extend_from_slice(cell);
            }
        }
        out.extend_from_slice(&self.mu_q_beta);
        for row in &self.sigma_q_beta {
            out.extend_from_slice(row);
        }
        out.extend_from_slice(&[self.alpha_q_sigma2, self.beta_q_sigma2, self.mu_q_inv_sigma2]);
    }

    /// Copy with the components of every outcome ordered by `mu_q_mu`
    /// ascending. Used for reporting; fitting keeps the original labels so
    /// that component-specific priors stay attached to their component.
    pub fn sorted_by_intercept(&self) -> OutcomeQState {
        let mut out = self.clone();
        for (j, block) in out.outcomes.iter_mut().enumerate() {
            let mut order: Vec<usize> = (0..block.components.len()).collect();
            order.sort_by(|&a, &b| {
                let (x, y) = (block.components[a].mu_q_mu, block.components[b].mu_q_mu);
                x.partial_cmp(&y).unwrap_or(core::cmp::Ordering::Equal).then(a.cmp(&b))
            });
            if order.iter().enumerate().all(|(k, &o)| k == o) {
                continue;
            }
            let src = &self.outcomes[j];
            block.components = order.iter().map(|&h| src.components[h].clone()).collect();
            block.alpha_q_w = order.iter().map(|&h| src.alpha_q_w[h]).collect();
            block.mu_q_log_w = order.iter().map(|&h| src.mu_q_log_w[h]).collect();
            for (i, row) in out.mu_q_a.iter_mut().enumerate() {
                if !row[j].is_empty() {
                    row[j] = order.iter().map(|&h| self.mu_q_a[i][j][h]).collect();
                }
            }
        }
        out
    }
}
