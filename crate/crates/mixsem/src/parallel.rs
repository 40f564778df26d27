//! Thread-pool versions of the Monte Carlo and resampling loops.
//!
//! Every unit of work owns the rng stream keyed by its index, and results
//! are collected in index order before any reduction, so the output does not
//! depend on the number of threads.

use mixsem_core::criteria::{criteria_from_rows, draw_loglik_row, loglik_row, CriteriaReport, VariationalFit};
use mixsem_core::uncertainty::{bootstrap_indices, predictive_draw, summarize_bootstrap, BootstrapSummary, Replicate};
use mixsem_core::{Dataset, Result};
use rayon::prelude::*;

/// Same result as [`mixsem_core::criteria::criteria`], with draws spread
/// over the pool.
pub fn criteria_par<F>(fit: &F, ds: &Dataset, draws: usize, seed: u64) -> Result<CriteriaReport>
where
    F: VariationalFit + Sync,
{
    let rows = (0..draws).into_par_iter().map(|s| draw_loglik_row(fit, ds, seed, s)).collect::<Result<Vec<_>>>()?;
    let plugin = loglik_row::<F>(&fit.plugin_theta()?, ds);
    criteria_from_rows(&rows, &plugin, seed)
}

/// Same result as [`mixsem_core::uncertainty::posterior_predictive`].
pub fn posterior_predictive_par<F>(fit: &F, ds: &Dataset, n_draws: usize, seed: u64) -> Result<Vec<Vec<f64>>>
where
    F: VariationalFit + Sync,
    F::Theta: Replicate,
{
    (0..n_draws).into_par_iter().map(|s| predictive_draw(fit, ds, seed, s)).collect()
}

/// Same result as [`mixsem_core::uncertainty::bootstrap`], one refit per task.
pub fn bootstrap_par<F>(ds: &Dataset, replicates: usize, seed: u64, level: f64, fit_one: F) -> Result<BootstrapSummary>
where
    F: Fn(&Dataset) -> Result<Vec<(String, f64)>> + Sync,
{
    if replicates < 2 {
        return Err(mixsem_core::Error::InvalidParameter(format!(
            "at least 2 bootstrap replicates are required, got {replicates}"
        )));
    }
    let results = (0..replicates)
        .into_par_iter()
        .map(|b| ds.subset_rows(&bootstrap_indices(ds.n(), seed, b)).and_then(|d| fit_one(&d)))
        .collect();
    summarize_bootstrap(results, seed, level)
}

/// Runs `f` on a pool capped at `threads` workers (all cores when `None`).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match threads {
        Some(n) if n > 0 => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        _ => f(),
    }
}
