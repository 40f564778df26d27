//! Closed-form coordinate updates of the latent-mixture model.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_traits::Float;

use super::spec::LatentMixtureSpec;
use super::state::{LatentComponentQ, LatentInit, LatentQState, MeasurementQ};
use crate::data::{mean_var, Dataset};
use crate::error::{bail, Result};
use crate::fit::FitOptions;
use crate::init::{mixreg_em, EmOptions};
use crate::math::gaussian::GaussianMoments;
use crate::math::linalg::{accumulate_outer, dot, from_rows, spd_inverse, to_rows, to_vec};
use crate::math::moments::{dirichlet_log_expectations, inverse_gamma_moments};
use crate::math::sum::softmax_in_place;
use crate::outcome::updates::expected_sq_residual;

fn component_moments(c: &LatentComponentQ) -> Result<GaussianMoments> {
    Ok(GaussianMoments { mean: DVector::from_column_slice(&c.mu_q_beta), cov: from_rows(&c.sigma_q_beta)? })
}

/// For every `k`: `q(beta_k)`, then `q(sigma2_k)` with rate
/// `beta_sigma2 - sum_i a_ik G(...)`, then `q(w)` when `K > 1`; finally
/// `E log w`.
pub fn update_components(state: &mut LatentQState, spec: &LatentMixtureSpec, ds: &Dataset) -> Result<()> {
    let p = ds.p();
    let prior_precision = spd_inverse(&from_rows(&spec.sigma_beta)?, "sigma_beta")?;
    let prior_shift = &prior_precision * DVector::from_column_slice(&spec.mu_beta);
    let kk = state.k();
    for k in 0..kk {
        let mut xtax = DMatrix::<f64>::zeros(p, p);
        let mut xaeta = DVector::<f64>::zeros(p);
        let mut mass = 0.0;
        for i in 0..ds.n() {
            let a = state.mu_q_a[i][k];
            accumulate_outer(&mut xtax, &mut xaeta, ds.x_row(i), a, a * state.mu_q_eta[i]);
            mass += a;
        }
        let inv_s2 = state.components[k].mu_q_inv_sigma2;
        let cov = spd_inverse(&(xtax * inv_s2 + &prior_precision), "q(beta_k) precision")?;
        let mean = &cov * (xaeta * inv_s2 + &prior_shift);
        let q_beta = GaussianMoments { mean, cov };
        let mut g_total = 0.0;
        for i in 0..ds.n() {
            g_total += state.mu_q_a[i][k] * q_beta.g_outer(ds.x_row(i), state.mu_q_eta[i], state.mu_q_eta2[i]);
        }
        let alpha = 0.5 * mass + spec.alpha_sigma2;
        let beta = spec.beta_sigma2 - g_total;
        let mom = inverse_gamma_moments(alpha, beta)?;
        let c = &mut state.components[k];
        c.mu_q_beta = to_vec(&q_beta.mean);
        c.sigma_q_beta = to_rows(&q_beta.cov);
        c.alpha_q_sigma2 = alpha;
        c.beta_q_sigma2 = beta;
        c.mu_q_inv_sigma2 = mom.mean_inv;
        c.mu_q_log_sigma2 = mom.mean_log;
        if kk > 1 {
            state.alpha_q_w[k] = mass + spec.alpha_w;
        }
    }
    state.mu_q_log_w = dirichlet_log_expectations(&state.alpha_q_w)?;
    Ok(())
}

/// Responsibilities of individual `i`, given the current component factors.
pub fn update_responsibility(state: &mut LatentQState, ds: &Dataset, q_beta: &[GaussianMoments], i: usize) {
    let half_log_2pi = 0.5 * (2.0 * PI).ln();
    let a = &mut state.mu_q_a[i];
    for (k, c) in state.components.iter().enumerate() {
        let g = q_beta[k].g_outer(ds.x_row(i), state.mu_q_eta[i], state.mu_q_eta2[i]);
        a[k] = state.mu_q_log_w[k] - 0.5 * c.mu_q_log_sigma2 - half_log_2pi + c.mu_q_inv_sigma2 * g;
    }
    softmax_in_place(a);
}

/// `q(eta_i)` for individual `i`.
pub fn update_latent(state: &mut LatentQState, ds: &Dataset, i: usize) {
    let x = ds.x_row(i);
    let mut precision = 0.0;
    let mut shift = 0.0;
    for (k, c) in state.components.iter().enumerate() {
        let w = state.mu_q_a[i][k] * c.mu_q_inv_sigma2;
        precision += w;
        shift += w * dot(x, &c.mu_q_beta);
    }
    for &j in ds.outcomes_observed(i) {
        let o = &state.outcomes[j];
        precision += o.mu_q_lambda2 * o.mu_q_inv_psi2;
        shift += o.mu_q_lambda * (ds.y_obs(i, j) - o.mu_q_nu) * o.mu_q_inv_psi2;
    }
    let var = 1.0 / precision;
    let mean = var * shift;
    state.sigma2_q_eta[i] = var;
    state.mu_q_eta[i] = mean;
    state.mu_q_eta2[i] = var + mean * mean;
}

/// Responsibilities then `q(eta_i)`, for every individual in turn.
pub fn update_individuals(state: &mut LatentQState, ds: &Dataset) -> Result<()> {
    let q_beta = state.components.iter().map(component_moments).collect::<Result<Vec<_>>>()?;
    for i in 0..ds.n() {
        update_responsibility(state, ds, &q_beta, i);
        update_latent(state, ds, i);
    }
    Ok(())
}

/// `q(lambda_j)` for `j >= 1` (zero-based).
pub fn update_loading(state: &mut LatentQState, spec: &LatentMixtureSpec, ds: &Dataset, j: usize) -> Result<()> {
    if j == 0 {
        bail!(InvalidParameter, "the first loading is fixed at 1");
    }
    let o = &state.outcomes[j];
    let mut precision = 1.0 / spec.sigma2_lambda;
    let mut shift = spec.mu_lambda / spec.sigma2_lambda;
    for &i in ds.rows_observing(j) {
        precision += state.mu_q_eta2[i] * o.mu_q_inv_psi2;
        shift += state.mu_q_eta[i] * o.mu_q_inv_psi2 * (ds.y_obs(i, j) - o.mu_q_nu);
    }
    let var = 1.0 / precision;
    let mean = var * shift;
    let o = &mut state.outcomes[j];
    o.sigma2_q_lambda = var;
    o.mu_q_lambda = mean;
    o.mu_q_lambda2 = var + mean * mean;
    Ok(())
}

/// `q(nu_j)`; a pinned `nu_1` is left alone.
pub fn update_intercept(state: &mut LatentQState, spec: &LatentMixtureSpec, ds: &Dataset, j: usize) {
    if j == 0 && spec.pin_nu1.is_some() {
        return;
    }
    let o = &state.outcomes[j];
    let rows = ds.rows_observing(j);
    let precision = rows.len() as f64 * o.mu_q_inv_psi2 + 1.0 / spec.sigma2_nu;
    let resid: f64 = rows.iter().map(|&i| ds.y_obs(i, j) - o.mu_q_lambda * state.mu_q_eta[i]).sum();
    let var = 1.0 / precision;
    let mean = var * (o.mu_q_inv_psi2 * resid + spec.mu_nu / spec.sigma2_nu);
    let o = &mut state.outcomes[j];
    o.sigma2_q_nu = var;
    o.mu_q_nu = mean;
    o.mu_q_nu2 = var + mean * mean;
}

/// `q(psi2_j)`; the shape is fixed, only the rate moves.
pub fn update_noise(state: &mut LatentQState, spec: &LatentMixtureSpec, ds: &Dataset, j: usize) {
    let o = &state.outcomes[j];
    let ss: f64 = ds
        .rows_observing(j)
        .iter()
        .map(|&i| {
            expected_sq_residual(
                ds.y_obs(i, j),
                o.mu_q_nu,
                o.mu_q_nu2,
                o.mu_q_lambda,
                o.mu_q_lambda2,
                state.mu_q_eta[i],
                state.mu_q_eta2[i],
            )
        })
        .sum();
    let o = &mut state.outcomes[j];
    o.beta_q_psi2 = spec.beta_psi2 + 0.5 * ss;
    o.mu_q_inv_psi2 = o.alpha_q_psi2 / o.beta_q_psi2;
}

/// One full cycle: component blocks and weights, then responsibilities and
/// factors per individual, then loading, intercept and noise per outcome.
pub fn sweep(state: &mut LatentQState, spec: &LatentMixtureSpec, ds: &Dataset) -> Result<()> {
    update_components(state, spec, ds)?;
    update_individuals(state, ds)?;
    for j in 0..ds.m() {
        if j > 0 {
            update_loading(state, spec, ds, j)?;
        }
        update_intercept(state, spec, ds, j);
        update_noise(state, spec, ds, j);
    }
    Ok(())
}

/// Starting state. `options` drives the single-component pre-fit used by
/// [`LatentInit::MixtureRegression`]; its seed also seeds the EM restarts.
pub fn init_state(
    spec: &LatentMixtureSpec,
    ds: &Dataset,
    init: &LatentInit,
    options: &FitOptions,
) -> Result<LatentQState> {
    spec.validate(ds)?;
    let mut state = match init {
        LatentInit::Warm(prev) => {
            check_shape(prev, spec, ds)?;
            (**prev).clone()
        }
        LatentInit::Spread => spread_state(spec, ds),
        LatentInit::MixtureRegression if spec.k == 1 => spread_state(spec, ds),
        LatentInit::MixtureRegression => mixreg_state(spec, ds, options)?,
    };
    for (j, o) in state.outcomes.iter_mut().enumerate() {
        o.alpha_q_psi2 = 0.5 * ds.n_obs(j) as f64 + spec.alpha_psi2;
    }
    let first = &mut state.outcomes[0];
    first.mu_q_lambda = 1.0;
    first.sigma2_q_lambda = 0.0;
    first.mu_q_lambda2 = 1.0;
    if let Some(v) = spec.pin_nu1 {
        first.mu_q_nu = v;
        first.sigma2_q_nu = 0.0;
        first.mu_q_nu2 = v * v;
    }
    Ok(state)
}

fn spread_state(spec: &LatentMixtureSpec, ds: &Dataset) -> LatentQState {
    let n = ds.n();
    let kk = spec.k;
    let stats: Vec<(f64, f64)> = (0..ds.m())
        .map(|j| {
            let (m, v) = mean_var(&ds.observed_values(j));
            (if m.is_finite() { m } else { 0.0 }, if v > 0.0 && v.is_finite() { v } else { 1.0 })
        })
        .collect();
    let outcomes = stats
        .iter()
        .enumerate()
        .map(|(j, &(mean, var))| {
            let alpha = 0.5 * ds.n_obs(j) as f64 + spec.alpha_psi2;
            MeasurementQ {
                mu_q_nu: mean,
                sigma2_q_nu: 0.0,
                mu_q_nu2: mean * mean,
                alpha_q_psi2: alpha,
                beta_q_psi2: alpha * var,
                mu_q_inv_psi2: 1.0 / var,
                mu_q_lambda: 1.0,
                sigma2_q_lambda: 1.0,
                mu_q_lambda2: 2.0,
            }
        })
        .collect();
    let sd1 = stats[0].1.sqrt();
    let score: Vec<f64> = (0..n)
        .map(|i| {
            let obs = ds.outcomes_observed(i);
            let z: f64 = obs.iter().map(|&j| (ds.y_obs(i, j) - stats[j].0) / stats[j].1.sqrt()).sum();
            sd1 * z / obs.len() as f64
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| score[a].total_cmp(&score[b]).then(a.cmp(&b)));
    let mut mu_q_a = vec![vec![1.0; kk]; n];
    if kk > 1 {
        for (rank, &i) in order.iter().enumerate() {
            let bucket = rank * kk / n;
            mu_q_a[i] = (0..kk).map(|k| if k == bucket { 0.8 } else { 0.2 / (kk - 1) as f64 }).collect();
        }
    }
    let alpha_sigma = 0.5 * n as f64 / kk as f64 + spec.alpha_sigma2;
    let components = (0..kk)
        .map(|_| LatentComponentQ {
            mu_q_beta: vec![0.0; ds.p()],
            sigma_q_beta: spec.sigma_beta.clone(),
            alpha_q_sigma2: alpha_sigma,
            beta_q_sigma2: alpha_sigma,
            mu_q_inv_sigma2: 1.0,
            mu_q_log_sigma2: 0.0,
        })
        .collect();
    LatentQState {
        outcomes,
        mu_q_eta: score.clone(),
        sigma2_q_eta: vec![1.0; n],
        mu_q_eta2: score.iter().map(|s| s * s + 1.0).collect(),
        mu_q_a,
        components,
        alpha_q_w: vec![spec.alpha_w + n as f64 / kk as f64; kk],
        mu_q_log_w: vec![-(kk as f64).ln(); kk],
    }
}

fn mixreg_state(spec: &LatentMixtureSpec, ds: &Dataset, options: &FitOptions) -> Result<LatentQState> {
    let single = LatentMixtureSpec { k: 1, ..spec.clone() };
    let (pre, _) = super::fit_latent(&single, ds, options, &LatentInit::Spread)?;
    let x: Vec<Vec<f64>> = (0..ds.n()).map(|i| ds.x_row(i).to_vec()).collect();
    let em = mixreg_em(&pre.mu_q_eta, &x, spec.k, false, &EmOptions::default(), options.seed)?;
    let components = (0..spec.k)
        .map(|k| {
            let mass: f64 = em.responsibilities.iter().map(|a| a[k]).sum();
            let alpha = 0.5 * mass + spec.alpha_sigma2;
            LatentComponentQ {
                mu_q_beta: em.coefficients[k].clone(),
                sigma_q_beta: spec.sigma_beta.clone(),
                alpha_q_sigma2: alpha,
                beta_q_sigma2: alpha * em.variances[k],
                mu_q_inv_sigma2: 1.0 / em.variances[k],
                mu_q_log_sigma2: em.variances[k].ln(),
            }
        })
        .collect();
    let alpha_q_w: Vec<f64> =
        (0..spec.k).map(|k| spec.alpha_w + em.responsibilities.iter().map(|a| a[k]).sum::<f64>()).collect();
    let mu_q_log_w = dirichlet_log_expectations(&alpha_q_w)?;
    Ok(LatentQState { components, alpha_q_w, mu_q_log_w, mu_q_a: em.responsibilities, ..pre })
}

fn check_shape(s: &LatentQState, spec: &LatentMixtureSpec, ds: &Dataset) -> Result<()> {
    let n = ds.n();
    if s.m() != ds.m() || s.k() != spec.k || s.alpha_q_w.len() != spec.k || s.mu_q_log_w.len() != spec.k {
        bail!(Dimension, "warm start has a different number of outcomes or components");
    }
    if s.n() != n || s.sigma2_q_eta.len() != n || s.mu_q_eta2.len() != n || s.mu_q_a.len() != n {
        bail!(Dimension, "warm start has a different number of individuals");
    }
    if s.mu_q_a.iter().any(|a| a.len() != spec.k) {
        bail!(Dimension, "warm start responsibilities do not have {} entries", spec.k);
    }
    let p = ds.p();
    if s.components.iter().any(|c| c.mu_q_beta.len() != p || c.sigma_q_beta.len() != p || c.sigma_q_beta.iter().any(|r| r.len() != p)) {
        bail!(Dimension, "warm start regression blocks are not of dimension {p}");
    }
    Ok(())
}
