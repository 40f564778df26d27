//! Draws from the densities that make up the variational approximation.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{bail, Result};

/// Tolerance on `sum(probs) == 1` for categorical draws.
const PROB_SUM_TOL: f64 = 1e-9;

/// `N(mu, sigma2)`. A zero variance returns `mu` without consuming randomness.
pub fn draw_normal<R: Rng + ?Sized>(mu: f64, sigma2: f64, rng: &mut R) -> Result<f64> {
    if !(sigma2 >= 0.0 && sigma2.is_finite()) || !mu.is_finite() {
        bail!(InvalidParameter, "normal needs finite mean and variance >= 0, got ({mu}, {sigma2})");
    }
    if sigma2 == 0.0 {
        return Ok(mu);
    }
    let z: f64 = StandardNormal.sample(rng);
    Ok(mu + sigma2.sqrt() * z)
}

/// `N(mu, sigma)` via the Cholesky factor. An all-zero `sigma` returns `mu`.
pub fn draw_mvnormal<R: Rng + ?Sized>(mu: &[f64], sigma: &DMatrix<f64>, rng: &mut R) -> Result<Vec<f64>> {
    let d = mu.len();
    if sigma.nrows() != d || sigma.ncols() != d {
        bail!(Dimension, "covariance is {}x{} for a mean of length {d}", sigma.nrows(), sigma.ncols());
    }
    if sigma.iter().all(|v| *v == 0.0) {
        return Ok(mu.to_vec());
    }
    let Some(chol) = sigma.clone().cholesky() else {
        bail!(InvalidParameter, "covariance is not positive definite");
    };
    let l = chol.l();
    let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
    Ok((0..d)
        .map(|i| mu[i] + (0..=i).map(|k| l[(i, k)] * z[k]).sum::<f64>())
        .collect())
}

/// `Gamma(shape, rate)` through rand_distr.
pub fn draw_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    match Gamma::new(shape, 1.0 / rate) {
        Ok(g) if shape > 0.0 && rate > 0.0 && rate.is_finite() => Ok(g.sample(rng)),
        _ => bail!(InvalidParameter, "gamma needs positive shape and rate, got ({shape}, {rate})"),
    }
}

/// `Inverse-Gamma(alpha, beta)` as the reciprocal of a `Gamma(alpha, beta)` draw.
pub fn draw_inverse_gamma<R: Rng + ?Sized>(alpha: f64, beta: f64, rng: &mut R) -> Result<f64> {
    if !(alpha > 0.0 && beta > 0.0) {
        bail!(InvalidParameter, "inverse-gamma needs positive shape and rate, got ({alpha}, {beta})");
    }
    Ok(1.0 / draw_gamma(alpha, beta, rng)?)
}

/// `Dirichlet(alpha)` from normalized gamma draws. The last component is
/// `1 - sum(rest)`, which keeps the sum at exactly one for two components.
pub fn draw_dirichlet<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    if alpha.is_empty() {
        bail!(InvalidParameter, "Dirichlet needs at least one component");
    }
    if alpha.len() == 1 {
        if !(alpha[0] > 0.0) {
            bail!(InvalidParameter, "Dirichlet parameters must be positive");
        }
        return Ok(alloc::vec![1.0]);
    }
    let g = alpha
        .iter()
        .map(|&a| draw_gamma(a, 1.0, rng))
        .collect::<Result<Vec<f64>>>()?;
    let total: f64 = g.iter().sum();
    let mut w: Vec<f64> = g.iter().map(|v| v / total).collect();
    let head: f64 = w[..w.len() - 1].iter().sum();
    *w.last_mut().expect("nonempty") = (1.0 - head).max(0.0);
    Ok(w)
}

/// Index drawn with probabilities `probs`, which must sum to one.
pub fn draw_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> Result<usize> {
    if probs.iter().any(|p| !(*p >= 0.0)) {
        bail!(InvalidParameter, "categorical probabilities must be nonnegative");
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > PROB_SUM_TOL {
        bail!(InvalidParameter, "categorical probabilities sum to {total}");
    }
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (h, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return Ok(h);
        }
    }
    Ok(probs.iter().rposition(|p| *p > 0.0).unwrap_or(0))
}
