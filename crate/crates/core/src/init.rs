//! EM helpers used to choose mixture sizes and to seed the variational fits:
//! univariate Gaussian mixtures with BIC selection, and mixtures of linear
//! regressions.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::mean_var;
use crate::error::{bail, Error, Result};
use crate::math::linalg::{accumulate_outer, spd_inverse};
use crate::math::rng::substream;
use crate::math::sum::log_sum_exp;

/// EM controls shared by both mixture fitters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmOptions {
    pub restarts: usize,
    /// Relative log-likelihood change that ends a run.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self { restarts: 10, tol: 1e-8, max_iter: 1000 }
    }
}

impl EmOptions {
    fn check(&self) -> Result<()> {
        if self.restarts == 0 || self.max_iter == 0 || !(self.tol > 0.0) {
            bail!(InvalidParameter, "EM options need restarts >= 1, max_iter >= 1 and tol > 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmFit {
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    pub weights: Vec<f64>,
    pub loglik: f64,
    pub converged: bool,
    /// Log-likelihood after every iteration of the winning restart.
    pub trace: Vec<f64>,
}

fn ln_normal(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (2.0 * PI * var).ln() - 0.5 * d * d / var
}

/// Best of `options.restarts` EM runs for an `h`-component univariate
/// Gaussian mixture. Restart `r` is seeded from stream `r` of `seed`.
pub fn gmm_em(values: &[f64], h: usize, options: &EmOptions, seed: u64) -> Result<GmmFit> {
    options.check()?;
    if h == 0 {
        bail!(InvalidParameter, "number of components must be at least 1");
    }
    let n = values.len();
    if n < 2 * h {
        bail!(Data, "{h} components need at least {} observations, got {n}", 2 * h);
    }
    if values.iter().any(|v| !v.is_finite()) {
        bail!(Data, "values must be finite");
    }
    let (mean, sample_var) = mean_var(values);
    let mle_var = sample_var * (n - 1) as f64 / n as f64;
    if !(mle_var > 0.0) {
        bail!(Data, "values are constant");
    }
    if h == 1 {
        let loglik = values.iter().map(|&x| ln_normal(x, mean, mle_var)).sum();
        return Ok(GmmFit {
            means: vec![mean],
            variances: vec![mle_var],
            weights: vec![1.0],
            loglik,
            converged: true,
            trace: vec![loglik],
        });
    }
    let floor = 1e-6 * mle_var;
    let mut best: Option<GmmFit> = None;
    for r in 0..options.restarts {
        let mut rng = substream(seed, r as u64);
        let centers = kmeans_pp(values, h, &mut rng);
        let fit = gmm_run(values, centers, mle_var, floor, options);
        if best.as_ref().is_none_or(|b| fit.loglik > b.loglik) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// k-means++ seeding: first center uniform, the rest drawn with probability
/// proportional to squared distance to the nearest chosen center.
fn kmeans_pp<R: Rng + ?Sized>(values: &[f64], h: usize, rng: &mut R) -> Vec<f64> {
    let mut centers = vec![values[rng.random_range(0..values.len())]];
    while centers.len() < h {
        let d2: Vec<f64> = values
            .iter()
            .map(|&x| centers.iter().map(|&c| (x - c) * (x - c)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = values.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if u < d {
                    pick = i;
                    break;
                }
                u -= d;
            }
            values[pick]
        } else {
            values[rng.random_range(0..values.len())]
        };
        centers.push(next);
    }
    centers
}

fn gmm_run(values: &[f64], centers: Vec<f64>, var: f64, floor: f64, options: &EmOptions) -> GmmFit {
    let h = centers.len();
    let n = values.len() as f64;
    let mut means = centers;
    let mut variances = vec![var; h];
    let mut weights = vec![1.0 / h as f64; h];
    let mut resp = vec![vec![0.0; h]; values.len()];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut terms = vec![0.0; h];
    for _ in 0..options.max_iter {
        let mut loglik = 0.0;
        for (x, row) in values.iter().zip(resp.iter_mut()) {
            for k in 0..h {
                terms[k] = weights[k].ln() + ln_normal(*x, means[k], variances[k]);
            }
            let lse = log_sum_exp(&terms);
            loglik += lse;
            for k in 0..h {
                row[k] = (terms[k] - lse).exp();
            }
        }
        let done = trace.last().is_some_and(|&prev: &f64| (loglik - prev).abs() <= options.tol * prev.abs());
        trace.push(loglik);
        if done {
            converged = true;
            break;
        }
        for k in 0..h {
            let nk: f64 = resp.iter().map(|r| r[k]).sum();
            if nk <= 0.0 {
                weights[k] = 0.0;
                continue;
            }
            let m = resp.iter().zip(values).map(|(r, x)| r[k] * x).sum::<f64>() / nk;
            let v = resp.iter().zip(values).map(|(r, x)| r[k] * (x - m) * (x - m)).sum::<f64>() / nk;
            means[k] = m;
            variances[k] = v.max(floor);
            weights[k] = nk / n;
        }
    }
    let loglik = *trace.last().expect("max_iter >= 1");
    GmmFit { means, variances, weights, loglik, converged, trace }
}

/// Outcome of [`select_components`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSelection {
    pub chosen: usize,
    /// `bic[h - 1]` for `h = 1..=h_max`.
    pub bic: Vec<f64>,
}

/// Minimizes `-2 loglik + (3H - 1) ln n` over `H = 1..=h_max`; ties go to
/// the smaller `H`.
pub fn select_components(values: &[f64], h_max: usize, options: &EmOptions, seed: u64) -> Result<ComponentSelection> {
    if h_max == 0 {
        bail!(InvalidParameter, "h_max must be at least 1");
    }
    let ln_n = (values.len() as f64).ln();
    let mut bic = Vec::with_capacity(h_max);
    for h in 1..=h_max {
        let fit = gmm_em(values, h, options, seed)?;
        bic.push(-2.0 * fit.loglik + (3 * h - 1) as f64 * ln_n);
    }
    let mut chosen = 1;
    for h in 2..=h_max {
        if bic[h - 1] < bic[chosen - 1] {
            chosen = h;
        }
    }
    Ok(ComponentSelection { chosen, bic })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixRegFit {
    /// Per-component intercepts; zeros when fitted without an intercept.
    pub intercepts: Vec<f64>,
    /// Per-component slopes on the supplied covariates.
    pub coefficients: Vec<Vec<f64>>,
    pub variances: Vec<f64>,
    pub weights: Vec<f64>,
    pub loglik: f64,
    pub converged: bool,
    pub trace: Vec<f64>,
    /// Final posterior membership probabilities, one row per observation.
    pub responsibilities: Vec<Vec<f64>>,
}

/// Best of `options.restarts` EM runs for a `k`-component mixture of linear
/// regressions of `y` on the rows of `x`, optionally with per-component
/// intercepts. Each restart clusters the pooled least-squares residuals
/// around k-means++ centers and starts EM from those soft memberships.
pub fn mixreg_em(
    y: &[f64],
    x: &[Vec<f64>],
    k: usize,
    intercept: bool,
    options: &EmOptions,
    seed: u64,
) -> Result<MixRegFit> {
    options.check()?;
    let n = y.len();
    if k == 0 {
        bail!(InvalidParameter, "number of components must be at least 1");
    }
    if x.len() != n {
        bail!(Dimension, "y has {n} entries, x has {} rows", x.len());
    }
    let p = x.first().map_or(0, Vec::len);
    if x.iter().any(|r| r.len() != p) {
        bail!(Dimension, "x rows have different lengths");
    }
    let d = p + usize::from(intercept);
    if n <= k * (d + 2) {
        bail!(Data, "{k} regression components on {d} columns need more than {} observations, got {n}", k * (d + 2));
    }
    if y.iter().chain(x.iter().flatten()).any(|v| !v.is_finite()) {
        bail!(Data, "values must be finite");
    }
    let design: Vec<Vec<f64>> = x
        .iter()
        .map(|r| if intercept { core::iter::once(1.0).chain(r.iter().copied()).collect() } else { r.clone() })
        .collect();
    let (_, var_y) = mean_var(y);
    let floor = 1e-6 * if var_y > 0.0 { var_y } else { 1.0 };

    let residuals = pooled_residuals(y, &design)?;
    let mut best: Option<(Vec<DVector<f64>>, MixRegFit)> = None;
    let mut last_err = None;
    for r in 0..options.restarts {
        let mut rng = substream(seed, r as u64);
        let resp: Vec<Vec<f64>> = if k == 1 {
            vec![vec![1.0]; n]
        } else {
            let centers = kmeans_pp(&residuals, k, &mut rng);
            residuals
                .iter()
                .map(|&e| {
                    let near = (0..k)
                        .min_by(|&a, &b| (e - centers[a]).abs().total_cmp(&(e - centers[b]).abs()))
                        .expect("k >= 1");
                    (0..k).map(|c| if c == near { 0.9 } else { 0.1 / (k - 1) as f64 }).collect()
                })
                .collect()
        };
        match mixreg_run(y, &design, resp, floor, options) {
            Ok(run) => {
                if best.as_ref().is_none_or(|b| run.1.loglik > b.1.loglik) {
                    best = Some(run);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let Some((coefs, mut fit)) = best else {
        return Err(last_err.unwrap_or_else(|| Error::Singular("mixture regression failed".into())));
    };
    for b in coefs {
        let v: Vec<f64> = b.iter().copied().collect();
        if intercept {
            fit.intercepts.push(v[0]);
            fit.coefficients.push(v[1..].to_vec());
        } else {
            fit.intercepts.push(0.0);
            fit.coefficients.push(v);
        }
    }
    Ok(fit)
}

fn pooled_residuals(y: &[f64], design: &[Vec<f64>]) -> Result<Vec<f64>> {
    let d = design[0].len();
    let mut xtx = DMatrix::<f64>::zeros(d, d);
    let mut xty = DVector::<f64>::zeros(d);
    for (xi, &yi) in design.iter().zip(y) {
        accumulate_outer(&mut xtx, &mut xty, xi, 1.0, yi);
    }
    let b = spd_inverse(&xtx, "design matrix")? * xty;
    Ok(design.iter().zip(y).map(|(xi, &yi)| yi - xi.iter().zip(b.iter()).map(|(a, c)| a * c).sum::<f64>()).collect())
}

fn mixreg_run(
    y: &[f64],
    design: &[Vec<f64>],
    mut resp: Vec<Vec<f64>>,
    floor: f64,
    options: &EmOptions,
) -> Result<(Vec<DVector<f64>>, MixRegFit)> {
    let n = y.len();
    let k = resp[0].len();
    let d = design[0].len();
    let mut coefs = vec![DVector::<f64>::zeros(d); k];
    let mut variances = vec![1.0; k];
    let mut weights = vec![1.0 / k as f64; k];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut terms = vec![0.0; k];
    for _ in 0..options.max_iter {
        // M step from the current memberships.
        for c in 0..k {
            let nk: f64 = resp.iter().map(|r| r[c]).sum();
            if nk <= 1e-12 {
                bail!(Singular, "mixture regression component {} is empty", c + 1);
            }
            let mut xtwx = DMatrix::<f64>::zeros(d, d);
            let mut xtwy = DVector::<f64>::zeros(d);
            for i in 0..n {
                let w = resp[i][c];
                accumulate_outer(&mut xtwx, &mut xtwy, &design[i], w, w * y[i]);
            }
            let b = spd_inverse(&xtwx, "weighted design matrix")? * xtwy;
            let ss: f64 = (0..n)
                .map(|i| {
                    let e = y[i] - design[i].iter().zip(b.iter()).map(|(a, c)| a * c).sum::<f64>();
                    resp[i][c] * e * e
                })
                .sum();
            coefs[c] = b;
            variances[c] = (ss / nk).max(floor);
            weights[c] = nk / n as f64;
        }
        // E step and log-likelihood at the new parameters.
        let mut loglik = 0.0;
        for i in 0..n {
            for c in 0..k {
                let fitted: f64 = design[i].iter().zip(coefs[c].iter()).map(|(a, b)| a * b).sum();
                terms[c] = weights[c].ln() + ln_normal(y[i], fitted, variances[c]);
            }
            let lse = log_sum_exp(&terms);
            loglik += lse;
            for c in 0..k {
                resp[i][c] = (terms[c] - lse).exp();
            }
        }
        if !loglik.is_finite() {
            bail!(Singular, "mixture regression log-likelihood is not finite");
        }
        let done = trace.last().is_some_and(|&prev: &f64| (loglik - prev).abs() <= options.tol * prev.abs());
        trace.push(loglik);
        if done {
            converged = true;
            break;
        }
    }
    let loglik = *trace.last().expect("max_iter >= 1");
    let fit = MixRegFit {
        intercepts: Vec::new(),
        coefficients: Vec::new(),
        variances,
        weights,
        loglik,
        converged,
        trace,
        responsibilities: resp,
    };
    Ok((coefs, fit))
}
