//! Closed-form coordinate updates. Every sum over individuals runs over the
//! observed cells of the outcome at hand only.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_traits::Float;

use super::spec::OutcomeMixtureSpec;
use super::state::{ComponentQ, OutcomeBlockQ, OutcomeInit, OutcomeQState};
use crate::data::Dataset;
use crate::error::{bail, Result};
use crate::math::gaussian::GaussianMoments;
use crate::math::linalg::{accumulate_outer, dot, from_rows, spd_inverse, to_rows, to_vec};
use crate::math::moments::{dirichlet_log_expectations, inverse_gamma_moments};
use crate::math::sum::softmax_in_place;

/// `E[(y - mu - lambda eta)^2]` for independent `mu`, `lambda`, `eta`,
/// written as a squared residual at the means plus variance corrections:
///
/// `y^2 + E mu^2 + E lambda^2 E eta^2 - 2y E mu - 2y E lambda E eta + 2 E mu E lambda E eta`.
#[inline]
pub(crate) fn expected_sq_residual(y: f64, mu: f64, mu2: f64, lam: f64, lam2: f64, eta: f64, eta2: f64) -> f64 {
    let r = y - mu - lam * eta;
    r * r + (mu2 - mu * mu) + (lam2 * eta2 - lam * lam * eta * eta)
}

/// Responsibilities `mu_q(a_ij)` for every observed cell of outcome `j`.
pub fn update_responsibilities(state: &mut OutcomeQState, ds: &Dataset, j: usize) {
    let block = &state.outcomes[j];
    let half_log_2pi = 0.5 * (2.0 * PI).ln();
    let hj = block.components.len();
    let mut tau = vec![0.0; hj];
    for &i in ds.rows_observing(j) {
        let y = ds.y_obs(i, j);
        for (h, c) in block.components.iter().enumerate() {
            let e = expected_sq_residual(
                y,
                c.mu_q_mu,
                c.mu_q_mu2,
                block.mu_q_lambda,
                block.mu_q_lambda2,
                state.mu_q_eta[i],
                state.mu_q_eta2[i],
            );
            tau[h] = block.mu_q_log_w[h] - 0.5 * c.mu_q_log_psi2 - half_log_2pi - 0.5 * c.mu_q_inv_psi2 * e;
        }
        softmax_in_place(&mut tau);
        state.mu_q_a[i][j].copy_from_slice(&tau);
    }
}

/// `q(lambda_j)` for `j >= 1` (zero-based); the first loading is fixed.
pub fn update_loadings(state: &mut OutcomeQState, spec: &OutcomeMixtureSpec, ds: &Dataset, j: usize) -> Result<()> {
    if j == 0 {
        bail!(InvalidParameter, "the first loading is fixed at 1");
    }
    let block = &state.outcomes[j];
    let mut precision = 1.0 / spec.sigma2_lambda;
    let mut shift = spec.mu_lambda / spec.sigma2_lambda;
    for &i in ds.rows_observing(j) {
        let y = ds.y_obs(i, j);
        let a = &state.mu_q_a[i][j];
        for (h, c) in block.components.iter().enumerate() {
            let w = a[h] * c.mu_q_inv_psi2;
            precision += w * state.mu_q_eta2[i];
            shift += w * state.mu_q_eta[i] * (y - c.mu_q_mu);
        }
    }
    let var = 1.0 / precision;
    let mean = var * shift;
    let block = &mut state.outcomes[j];
    block.sigma2_q_lambda = var;
    block.mu_q_lambda = mean;
    block.mu_q_lambda2 = var + mean * mean;
    Ok(())
}

/// `q(mu_jh)` for every component of outcome `j`.
pub fn update_intercepts(state: &mut OutcomeQState, spec: &OutcomeMixtureSpec, ds: &Dataset, j: usize) {
    let hj = state.outcomes[j].components.len();
    for h in 0..hj {
        let block = &state.outcomes[j];
        let c = &block.components[h];
        let mut precision = 1.0 / spec.sigma2_mu[j][h];
        let mut shift = spec.mu_mu[j][h] / spec.sigma2_mu[j][h];
        for &i in ds.rows_observing(j) {
            let w = state.mu_q_a[i][j][h] * c.mu_q_inv_psi2;
            precision += w;
            shift += w * (ds.y_obs(i, j) - block.mu_q_lambda * state.mu_q_eta[i]);
        }
        let var = 1.0 / precision;
        let mean = var * shift;
        let c = &mut state.outcomes[j].components[h];
        c.sigma2_q_mu = var;
        c.mu_q_mu = mean;
        c.mu_q_mu2 = var + mean * mean;
    }
}

/// `q(psi2_jh)` for every component of outcome `j`, then `q(w_j)` when
/// `H_j > 1`, then `E log w_j`.
pub fn update_noise_and_weights(
    state: &mut OutcomeQState,
    spec: &OutcomeMixtureSpec,
    ds: &Dataset,
    j: usize,
) -> Result<()> {
    let hj = state.outcomes[j].components.len();
    let rows = ds.rows_observing(j);
    for h in 0..hj {
        let block = &state.outcomes[j];
        let c = &block.components[h];
        let mut mass = 0.0;
        let mut ss = 0.0;
        for &i in rows {
            let a = state.mu_q_a[i][j][h];
            mass += a;
            ss += a * expected_sq_residual(
                ds.y_obs(i, j),
                c.mu_q_mu,
                c.mu_q_mu2,
                block.mu_q_lambda,
                block.mu_q_lambda2,
                state.mu_q_eta[i],
                state.mu_q_eta2[i],
            );
        }
        let alpha = 0.5 * mass + spec.alpha_psi2;
        let beta = spec.beta_psi2 + 0.5 * ss;
        let mom = inverse_gamma_moments(alpha, beta)?;
        let c = &mut state.outcomes[j].components[h];
        c.alpha_q_psi2 = alpha;
        c.beta_q_psi2 = beta;
        c.mu_q_inv_psi2 = mom.mean_inv;
        c.mu_q_log_psi2 = mom.mean_log;
        if hj > 1 {
            state.outcomes[j].alpha_q_w[h] = mass + spec.alpha_w;
        }
    }
    let block = &mut state.outcomes[j];
    block.mu_q_log_w = dirichlet_log_expectations(&block.alpha_q_w)?;
    Ok(())
}

/// `q(eta_i)` for every individual.
pub fn update_latents(state: &mut OutcomeQState, ds: &Dataset) {
    for i in 0..ds.n() {
        let mut precision = state.mu_q_inv_sigma2;
        let mut shift = state.mu_q_inv_sigma2 * dot(ds.x_row(i), &state.mu_q_beta);
        for &j in ds.outcomes_observed(i) {
            let block = &state.outcomes[j];
            let y = ds.y_obs(i, j);
            let a = &state.mu_q_a[i][j];
            for (h, c) in block.components.iter().enumerate() {
                let w = a[h] * c.mu_q_inv_psi2;
                precision += w * block.mu_q_lambda2;
                shift += w * block.mu_q_lambda * (y - c.mu_q_mu);
            }
        }
        let var = 1.0 / precision;
        let mean = var * shift;
        state.sigma2_q_eta[i] = var;
        state.mu_q_eta[i] = mean;
        state.mu_q_eta2[i] = var + mean * mean;
    }
}

/// `q(beta)` and then `q(sigma2)`. The rate of `q(sigma2)` is
/// `beta_sigma2 - sum_i G(eta_q(beta); x_i x_i', E[eta_i] x_i, E[eta_i^2])`,
/// evaluated through the moment form of the just-updated `q(beta)`.
pub fn update_regression(state: &mut OutcomeQState, spec: &OutcomeMixtureSpec, ds: &Dataset) -> Result<()> {
    let p = ds.p();
    let prior_precision = spd_inverse(&from_rows(&spec.sigma_beta)?, "sigma_beta")?;
    let mut xtx = DMatrix::<f64>::zeros(p, p);
    let mut xeta = DVector::<f64>::zeros(p);
    for i in 0..ds.n() {
        accumulate_outer(&mut xtx, &mut xeta, ds.x_row(i), 1.0, state.mu_q_eta[i]);
    }
    let precision = &xtx * state.mu_q_inv_sigma2 + &prior_precision;
    let cov = spd_inverse(&precision, "q(beta) precision")?;
    let mean = &cov * (xeta * state.mu_q_inv_sigma2 + &prior_precision * DVector::from_column_slice(&spec.mu_beta));
    let q_beta = GaussianMoments { mean, cov };

    let mut g_total = 0.0;
    for i in 0..ds.n() {
        g_total += q_beta.g_outer(ds.x_row(i), state.mu_q_eta[i], state.mu_q_eta2[i]);
    }
    let rate = spec.beta_sigma2 - g_total;
    if !(rate > 0.0) {
        bail!(Singular, "q(sigma2) rate is not positive ({rate})");
    }
    state.mu_q_beta = to_vec(&q_beta.mean);
    state.sigma_q_beta = to_rows(&q_beta.cov);
    state.beta_q_sigma2 = rate;
    state.mu_q_inv_sigma2 = state.alpha_q_sigma2 / rate;
    Ok(())
}

/// One full cycle: for each outcome the responsibilities, loading,
/// intercepts, noise and weights; then all latent factors; then `beta` and
/// `sigma2`.
pub fn sweep(state: &mut OutcomeQState, spec: &OutcomeMixtureSpec, ds: &Dataset) -> Result<()> {
    for j in 0..ds.m() {
        update_responsibilities(state, ds, j);
        if j > 0 {
            update_loadings(state, spec, ds, j)?;
        }
        update_intercepts(state, spec, ds, j);
        update_noise_and_weights(state, spec, ds, j)?;
    }
    update_latents(state, ds);
    update_regression(state, spec, ds)
}

/// Starting state. `alpha_q_sigma2 = (N + 2 alpha_sigma2) / 2` is fixed and
/// the first loading is pinned at 1 whatever the initializer says.
pub fn init_state(spec: &OutcomeMixtureSpec, ds: &Dataset, init: &OutcomeInit) -> Result<OutcomeQState> {
    spec.validate(ds)?;
    let n = ds.n();
    let alpha_q_sigma2 = (n as f64 + 2.0 * spec.alpha_sigma2) / 2.0;
    let mut state = match init {
        OutcomeInit::Warm(prev) => {
            check_shape(prev, spec, ds)?;
            (**prev).clone()
        }
        OutcomeInit::Default => default_state(spec, ds, alpha_q_sigma2),
    };
    state.alpha_q_sigma2 = alpha_q_sigma2;
    let first = &mut state.outcomes[0];
    first.mu_q_lambda = 1.0;
    first.sigma2_q_lambda = 0.0;
    first.mu_q_lambda2 = 1.0;
    Ok(state)
}

fn default_state(spec: &OutcomeMixtureSpec, ds: &Dataset, alpha_q_sigma2: f64) -> OutcomeQState {
    let n = ds.n();
    let p = ds.p();
    let outcomes = (0..ds.m())
        .map(|j| {
            let hj = spec.h[j];
            let (mean, var) = match ds.n_obs(j) {
                0 => (0.0, 1.0),
                1 => (ds.observed_values(j)[0], 1.0),
                _ => {
                    let (m, v) = ds.observed_mean_var(j);
                    (m, if v > 0.0 { v } else { 1.0 })
                }
            };
            let sd = var.sqrt();
            let components = (0..hj)
                .map(|h| {
                    let spread = if hj == 1 { 0.0 } else { 2.0 * h as f64 / (hj - 1) as f64 - 1.0 };
                    let mu = mean + sd * spread;
                    ComponentQ {
                        mu_q_mu: mu,
                        sigma2_q_mu: 0.0,
                        mu_q_mu2: mu * mu,
                        alpha_q_psi2: spec.alpha_psi2,
                        beta_q_psi2: spec.alpha_psi2 * var,
                        mu_q_inv_psi2: 1.0 / var,
                        mu_q_log_psi2: var.ln(),
                    }
                })
                .collect();
            OutcomeBlockQ {
                components,
                alpha_q_w: vec![spec.alpha_w + ds.n_obs(j) as f64 / hj as f64; hj],
                mu_q_log_w: vec![-(hj as f64).ln(); hj],
                mu_q_lambda: 1.0,
                sigma2_q_lambda: 1.0,
                mu_q_lambda2: 2.0,
            }
        })
        .collect();
    let mu_q_a = (0..n)
        .map(|i| {
            (0..ds.m())
                .map(|j| if ds.is_observed(i, j) { vec![1.0 / spec.h[j] as f64; spec.h[j]] } else { Vec::new() })
                .collect()
        })
        .collect();
    OutcomeQState {
        outcomes,
        mu_q_eta: vec![0.0; n],
        sigma2_q_eta: vec![1.0; n],
        mu_q_eta2: vec![1.0; n],
        mu_q_a,
        mu_q_beta: vec![0.0; p],
        sigma_q_beta: spec.sigma_beta.clone(),
        alpha_q_sigma2,
        beta_q_sigma2: alpha_q_sigma2,
        mu_q_inv_sigma2: 1.0,
    }
}

fn check_shape(s: &OutcomeQState, spec: &OutcomeMixtureSpec, ds: &Dataset) -> Result<()> {
    if s.n() != ds.n() || s.m() != ds.m() || s.mu_q_beta.len() != ds.p() {
        bail!(Dimension, "warm start has a different shape than the data");
    }
    if s.sigma2_q_eta.len() != ds.n() || s.mu_q_eta2.len() != ds.n() || s.mu_q_a.len() != ds.n() {
        bail!(Dimension, "warm start has a different number of individuals");
    }
    for j in 0..ds.m() {
        let b = &s.outcomes[j];
        if b.components.len() != spec.h[j] || b.alpha_q_w.len() != spec.h[j] || b.mu_q_log_w.len() != spec.h[j] {
            bail!(Dimension, "warm start outcome {} does not have {} components", j + 1, spec.h[j]);
        }
    }
    for i in 0..ds.n() {
        if s.mu_q_a[i].len() != ds.m() {
            bail!(Dimension, "warm start responsibilities for row {} are malformed", i + 1);
        }
        for j in 0..ds.m() {
            let want = if ds.is_observed(i, j) { spec.h[j] } else { 0 };
            if s.mu_q_a[i][j].len() != want {
                bail!(Dimension, "warm start responsibilities for cell ({}, {}) are malformed", i + 1, j + 1);
            }
        }
    }
    if s.sigma_q_beta.len() != ds.p() || s.sigma_q_beta.iter().any(|r| r.len() != ds.p()) {
        bail!(Dimension, "warm start sigma_q_beta is not {0}x{0}", ds.p());
    }
    Ok(())
}
