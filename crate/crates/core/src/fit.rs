//! Convergence control shared by both coordinate-ascent fits.
//!
//! No closed-form lower bound is tracked. A fit stops at the first sweep
//! whose largest relative parameter change, `max |new - old| / (|old| + 1e-8)`
//! over every stored scalar, falls below `tol`.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Offset in the denominator of the relative change.
pub const RELATIVE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 500, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub iterations: usize,
    pub metric_trace: Vec<f64>,
    pub converged: bool,
    /// Whether the metric never increased from one sweep to the next.
    /// Informational only; coordinate ascent on parameters need not be monotone.
    pub metric_monotone: bool,
    /// Wall time, filled in by callers that have a clock.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_secs: Option<f64>,
}

/// Largest relative change between two flattened parameter vectors.
pub fn convergence_metric(old: &[f64], new: &[f64]) -> f64 {
    debug_assert_eq!(old.len(), new.len());
    old.iter()
        .zip(new)
        .map(|(o, n)| (n - o).abs() / (o.abs() + RELATIVE_FLOOR))
        .fold(0.0, |acc: f64, v| if v.is_nan() || acc.is_nan() { f64::NAN } else { acc.max(v) })
}

/// Runs `sweep` until the metric drops below `options.tol` or `max_iter`
/// sweeps have been made.
pub(crate) fn iterate<S>(
    state: &mut S,
    options: &FitOptions,
    mut sweep: impl FnMut(&mut S) -> Result<()>,
    flatten: impl Fn(&S, &mut Vec<f64>),
) -> Result<FitReport> {
    if !(options.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be positive, got {}", options.tol)));
    }
    if options.max_iter == 0 {
        return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
    }
    let mut old = Vec::new();
    let mut new = Vec::new();
    flatten(state, &mut old);
    let mut trace = Vec::new();
    let mut converged = false;
    for iteration in 1..=options.max_iter {
        sweep(state).map_err(|e| match e {
            Error::Numerical { .. } => e,
            other => Error::Numerical { iteration, message: format!("{other}") },
        })?;
        new.clear();
        flatten(state, &mut new);
        if new.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical { iteration, message: "non-finite variational parameter".into() });
        }
        let metric = convergence_metric(&old, &new);
        trace.push(metric);
        core::mem::swap(&mut old, &mut new);
        if metric < options.tol {
            converged = true;
            break;
        }
    }
    let metric_monotone = trace.windows(2).all(|w| w[1] <= w[0]);
    Ok(FitReport { iterations: trace.len(), metric_trace: trace, converged, metric_monotone, elapsed_secs: None })
}
