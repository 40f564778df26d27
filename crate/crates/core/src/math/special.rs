//! Digamma and log-gamma.


use num_traits::Float;
use crate::error::{bail, Result};

/// Below this the argument is shifted upward with `psi(x) = psi(x + 1) - 1/x`
/// before the asymptotic expansion is applied.
const ASYMPTOTIC_THRESHOLD: f64 = 10.0;

/// Digamma function `psi(x) = d/dx ln Gamma(x)` for `x > 0`.
pub fn digamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        bail!(Domain, "digamma requires a finite positive argument, got {x}");
    }
    Ok(digamma_positive(x))
}

/// Digamma without the domain check; callers guarantee `x > 0`.
pub(crate) fn digamma_positive(x: f64) -> f64 {
    let mut shift = 0.0;
    let mut z = x;
    while z < ASYMPTOTIC_THRESHOLD {
        shift += 1.0 / z;
        z += 1.0;
    }
    let r = 1.0 / (z * z);
    // Bernoulli-number tail: -sum B_{2k} / (2k z^{2k}), k = 1..7
    let tail = r
        * (1.0 / 12.0
            - r * (1.0 / 120.0
                - r * (1.0 / 252.0
                    - r * (1.0 / 240.0
                        - r * (1.0 / 132.0 - r * (691.0 / 32760.0 - r * (1.0 / 12.0)))))));
    z.ln() - 0.5 / z - tail - shift
}

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        bail!(Domain, "ln_gamma requires a finite positive argument, got {x}");
    }
    Ok(libm::lgamma(x))
}
