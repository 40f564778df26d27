//! Tables for posterior-predictive checks.

use mixsem_core::uncertainty::{kde, kde_at, silverman_bandwidth};
use mixsem_core::Dataset;

use crate::error::Result;

/// `(draw, individual, outcome, value)` rows over observed cells only.
/// Draws and individuals are numbered from 1.
pub fn replicate_rows(ds: &Dataset, draws: &[Vec<f64>]) -> Vec<Vec<String>> {
    let m = ds.m();
    let mut rows = Vec::with_capacity(draws.len() * ds.total_observed());
    for (s, rep) in draws.iter().enumerate() {
        for i in 0..ds.n() {
            for &j in ds.outcomes_observed(i) {
                rows.push(vec![
                    (s + 1).to_string(),
                    (i + 1).to_string(),
                    ds.outcome_names()[j].clone(),
                    rep[i * m + j].to_string(),
                ]);
            }
        }
    }
    rows
}

/// `(outcome, grid, density, draw)` rows: for each outcome, one density
/// per replicated draw and their pointwise mean (`draw = "mean"`) on the
/// grid of the observed data's own estimate.
pub fn kde_rows(ds: &Dataset, draws: &[Vec<f64>]) -> Result<Vec<Vec<String>>> {
    let m = ds.m();
    let mut rows = Vec::new();
    for j in 0..m {
        let name = &ds.outcome_names()[j];
        let observed = ds.observed_values(j);
        let grid = kde(&observed, None)?.grid;
        let mut mean = vec![0.0; grid.len()];
        for (s, rep) in draws.iter().enumerate() {
            let values: Vec<f64> = ds.rows_observing(j).iter().map(|&i| rep[i * m + j]).collect();
            let density = kde_at(&values, silverman_bandwidth(&values)?, &grid);
            for (g, d) in density.iter().enumerate() {
                mean[g] += d / draws.len() as f64;
                rows.push(vec![name.clone(), grid[g].to_string(), d.to_string(), (s + 1).to_string()]);
            }
        }
        for (g, d) in mean.iter().enumerate() {
            rows.push(vec![name.clone(), grid[g].to_string(), d.to_string(), "mean".into()]);
        }
    }
    Ok(rows)
}
