//! Expectations under Inverse-Gamma and Dirichlet densities.

use alloc::vec::Vec;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::math::special::digamma_positive;

/// Moments of `X ~ Inverse-Gamma(alpha, beta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseGammaMoments {
    /// `E[1/X] = alpha / beta`.
    pub mean_inv: f64,
    /// `E[log X] = log beta - digamma(alpha)`.
    pub mean_log: f64,
    /// `E[X] = beta / (alpha - 1)`, present only for `alpha > 1`.
    pub mean: Option<f64>,
}

pub fn inverse_gamma_moments(alpha: f64, beta: f64) -> Result<InverseGammaMoments> {
    if !(alpha > 0.0 && alpha.is_finite()) || !(beta > 0.0 && beta.is_finite()) {
        bail!(Domain, "inverse-gamma parameters must be positive, got ({alpha}, {beta})");
    }
    Ok(InverseGammaMoments {
        mean_inv: alpha / beta,
        mean_log: beta.ln() - digamma_positive(alpha),
        mean: (alpha > 1.0).then(|| beta / (alpha - 1.0)),
    })
}

/// `E[log w_h] = digamma(alpha_h) - digamma(sum alpha)` for `w ~ Dirichlet(alpha)`.
pub fn dirichlet_log_expectations(alpha: &[f64]) -> Result<Vec<f64>> {
    if alpha.is_empty() {
        bail!(Domain, "Dirichlet needs at least one component");
    }
    if let Some(a) = alpha.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
        bail!(Domain, "Dirichlet parameters must be positive, got {a}");
    }
    let total = digamma_positive(alpha.iter().sum());
    Ok(alpha.iter().map(|&a| digamma_positive(a) - total).collect())
}
