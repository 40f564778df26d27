//! Central credible intervals of the `q` marginals.

use mixsem_core::uncertainty::QMarginal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF, Gamma, Normal};

use crate::error::{Error, Result};

/// `(lo, hi)` with `(1 - level) / 2` of the mass beyond each end.
///
/// Inverse-Gamma quantiles are reciprocals of Gamma quantiles. A Gaussian
/// with zero variance and a pinned value give a zero-width interval.
pub fn credible_interval(m: &QMarginal, level: f64) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Invalid(format!("level must lie in (0, 1), got {level}")));
    }
    let a = (1.0 - level) / 2.0;
    let bad = |e: &dyn std::fmt::Display| Error::Invalid(format!("credible interval of {m:?}: {e}"));
    match *m {
        QMarginal::Fixed { value } => Ok((value, value)),
        QMarginal::Gaussian { mean, variance } if variance == 0.0 => Ok((mean, mean)),
        QMarginal::Gaussian { mean, variance } => {
            let d = Normal::new(mean, variance.sqrt()).map_err(|e| bad(&e))?;
            Ok((d.inverse_cdf(a), d.inverse_cdf(1.0 - a)))
        }
        QMarginal::InverseGamma { alpha, beta } => {
            let g = Gamma::new(alpha, beta).map_err(|e| bad(&e))?;
            Ok((1.0 / g.inverse_cdf(1.0 - a), 1.0 / g.inverse_cdf(a)))
        }
        QMarginal::Beta { a: p, b: q } => {
            let d = Beta::new(p, q).map_err(|e| bad(&e))?;
            Ok((d.inverse_cdf(a), d.inverse_cdf(1.0 - a)))
        }
    }
}

/// A named parameter with its `q` mean and credible interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub name: String,
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Means and intervals of every reported parameter.
pub fn estimates(marginals: &[mixsem_core::uncertainty::NamedMarginal], level: f64) -> Result<Vec<Estimate>> {
    marginals
        .iter()
        .map(|m| {
            let (lo, hi) = credible_interval(&m.marginal, level)?;
            Ok(Estimate { name: m.name.clone(), mean: m.marginal.mean(), lo, hi })
        })
        .collect()
}
