//! Interval estimates and replicated data.
//!
//! The quantile rule everywhere is linear interpolation between order
//! statistics: with sorted `x_1..x_n`, `Q(p) = x_k + f (x_{k+1} - x_k)` where
//! `k + f = 1 + (n - 1) p`.
//!
//! Credible-interval quantiles of the `q` marginals need the inverse CDFs of
//! the Gaussian, Inverse-Gamma and Beta laws; this crate only describes the
//! marginals ([`QMarginal`]) and leaves the quantile evaluation to callers.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::criteria::{LatentTheta, OutcomeTheta, VariationalFit};
use crate::data::Dataset;
use crate::error::{bail, Error, Result};
use crate::latent::LatentQState;
use crate::math::rng::substream;
use crate::math::sampling::{draw_categorical, draw_normal};
use crate::outcome::OutcomeQState;

/// Share of failed bootstrap replicates above which the run is an error.
pub const MAX_FAILED_SHARE: f64 = 0.2;

/// Grid size of [`kde`].
pub const KDE_GRID: usize = 512;

/// Sample quantile at probability `p` under the linear-interpolation rule.
pub fn quantile_type7(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        bail!(InvalidParameter, "quantile of an empty sample");
    }
    if !(0.0..=1.0).contains(&p) {
        bail!(InvalidParameter, "probability {p} outside [0, 1]");
    }
    if values.iter().any(|v| v.is_nan()) {
        bail!(Domain, "quantile of a sample containing NaN");
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    Ok(sorted_quantile(&sorted, p))
}

fn sorted_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let f = h - lo as f64;
    if f == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + f * (sorted[hi] - sorted[lo])
    }
}

/// Central `level` interval: the `(1 - level)/2` and `(1 + level)/2` quantiles.
pub fn percentile_interval(values: &[f64], level: f64) -> Result<(f64, f64)> {
    check_level(level)?;
    let a = (1.0 - level) / 2.0;
    Ok((quantile_type7(values, a)?, quantile_type7(values, 1.0 - a)?))
}

pub(crate) fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        bail!(InvalidParameter, "level must lie in (0, 1), got {level}");
    }
    Ok(())
}

/// Marginal law of one scalar under `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum QMarginal {
    Gaussian { mean: f64, variance: f64 },
    InverseGamma { alpha: f64, beta: f64 },
    /// Marginal of one Dirichlet coordinate.
    Beta { a: f64, b: f64 },
    /// Pinned by the model.
    Fixed { value: f64 },
}

impl QMarginal {
    /// Mean of the law; infinite for an Inverse-Gamma with shape at most 1.
    pub fn mean(&self) -> f64 {
        match *self {
            QMarginal::Gaussian { mean, .. } => mean,
            QMarginal::InverseGamma { alpha, beta } => {
                if alpha > 1.0 {
                    beta / (alpha - 1.0)
                } else {
                    f64::INFINITY
                }
            }
            QMarginal::Beta { a, b } => a / (a + b),
            QMarginal::Fixed { value } => value,
        }
    }
}

/// A named scalar parameter and its `q` marginal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedMarginal {
    pub name: String,
    pub marginal: QMarginal,
}

impl NamedMarginal {
    fn new(name: String, marginal: QMarginal) -> Self {
        Self { name, marginal }
    }
}

/// States whose scalar parameters can be listed under stable names.
pub trait ParameterSummary {
    /// Every reported scalar with its marginal, in a fixed order, after
    /// sorting mixture labels. Indices in the names start at 1.
    fn marginals(&self, ds: &Dataset) -> Vec<NamedMarginal>;

    /// `(name, q mean)` pairs of [`ParameterSummary::marginals`].
    fn point_estimates(&self, ds: &Dataset) -> Vec<(String, f64)> {
        self.marginals(ds).into_iter().map(|m| (m.name, m.marginal.mean())).collect()
    }
}

fn beta_marginals(alpha: &[f64]) -> Vec<QMarginal> {
    let total: f64 = alpha.iter().sum();
    alpha.iter().map(|&a| QMarginal::Beta { a, b: total - a }).collect()
}

impl ParameterSummary for OutcomeQState {
    /// `lambda[j]` for `j >= 2`, then per outcome `mu[j,h]`, `psi2[j,h]` and,
    /// when `H_j > 1`, `w[j,h]`; then `beta[k]` and `sigma2`. Components
    /// are ordered by intercept.
    fn marginals(&self, _ds: &Dataset) -> Vec<NamedMarginal> {
        let s = self.sorted_by_intercept();
        let mut out = Vec::new();
        for (j, o) in s.outcomes.iter().enumerate().skip(1) {
            out.push(NamedMarginal::new(
                format!("lambda[{}]", j + 1),
                QMarginal::Gaussian { mean: o.mu_q_lambda, variance: o.sigma2_q_lambda },
            ));
        }
        for (j, o) in s.outcomes.iter().enumerate() {
            for (h, c) in o.components.iter().enumerate() {
                out.push(NamedMarginal::new(
                    format!("mu[{},{}]", j + 1, h + 1),
                    QMarginal::Gaussian { mean: c.mu_q_mu, variance: c.sigma2_q_mu },
                ));
            }
            for (h, c) in o.components.iter().enumerate() {
                out.push(NamedMarginal::new(
                    format!("psi2[{},{}]", j + 1, h + 1),
                    QMarginal::InverseGamma { alpha: c.alpha_q_psi2, beta: c.beta_q_psi2 },
                ));
            }
            if o.components.len() > 1 {
                for (h, m) in beta_marginals(&o.alpha_q_w).into_iter().enumerate() {
                    out.push(NamedMarginal::new(format!("w[{},{}]", j + 1, h + 1), m));
                }
            }
        }
        for (k, b) in s.mu_q_beta.iter().enumerate() {
            out.push(NamedMarginal::new(
                format!("beta[{}]", k + 1),
                QMarginal::Gaussian { mean: *b, variance: s.sigma_q_beta[k][k] },
            ));
        }
        out.push(NamedMarginal::new(
            "sigma2".into(),
            QMarginal::InverseGamma { alpha: s.alpha_q_sigma2, beta: s.beta_q_sigma2 },
        ));
        out
    }
}

impl ParameterSummary for LatentQState {
    /// `nu[j]`, `lambda[j]` for `j >= 2`, `psi2[j]`, then per component
    /// `beta[k,l]` and `sigma2[k]`, then `w[k]` when `K > 1`. Components are
    /// ordered by their regression line at the covariate means.
    fn marginals(&self, ds: &Dataset) -> Vec<NamedMarginal> {
        let s = self.sorted_by_slope(&ds.covariate_means());
        let mut out = Vec::new();
        for (j, o) in s.outcomes.iter().enumerate() {
            out.push(NamedMarginal::new(
                format!("nu[{}]", j + 1),
                QMarginal::Gaussian { mean: o.mu_q_nu, variance: o.sigma2_q_nu },
            ));
        }
        for (j, o) in s.outcomes.iter().enumerate().skip(1) {
            out.push(NamedMarginal::new(
                format!("lambda[{}]", j + 1),
                QMarginal::Gaussian { mean: o.mu_q_lambda, variance: o.sigma2_q_lambda },
            ));
        }
        for (j, o) in s.outcomes.iter().enumerate() {
            out.push(NamedMarginal::new(
                format!("psi2[{}]", j + 1),
                QMarginal::InverseGamma { alpha: o.alpha_q_psi2, beta: o.beta_q_psi2 },
            ));
        }
        for (k, c) in s.components.iter().enumerate() {
            for (l, b) in c.mu_q_beta.iter().enumerate() {
                out.push(NamedMarginal::new(
                    format!("beta[{},{}]", k + 1, l + 1),
                    QMarginal::Gaussian { mean: *b, variance: c.sigma_q_beta[l][l] },
                ));
            }
            out.push(NamedMarginal::new(
                format!("sigma2[{}]", k + 1),
                QMarginal::InverseGamma { alpha: c.alpha_q_sigma2, beta: c.beta_q_sigma2 },
            ));
        }
        if s.k() > 1 {
            for (k, m) in beta_marginals(&s.alpha_q_w).into_iter().enumerate() {
                out.push(NamedMarginal::new(format!("w[{}]", k + 1), m));
            }
        }
        out
    }
}

/// Resampled row indices of bootstrap replicate `b`, from stream `b` of `seed`.
pub fn bootstrap_indices(n: usize, seed: u64, b: usize) -> Vec<usize> {
    let mut rng = substream(seed, b as u64);
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Percentile interval of one parameter across bootstrap replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapInterval {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
}

/// Outcome of a bootstrap run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub replicates: usize,
    pub seed: u64,
    pub level: f64,
    pub names: Vec<String>,
    /// Point estimates of each successful replicate, in replicate order.
    pub estimates: Vec<Vec<f64>>,
    /// Index of the replicate that produced each row of `estimates`.
    pub replicate_ids: Vec<usize>,
    /// `(replicate, message)` of every failed replicate.
    pub failures: Vec<(usize, String)>,
    pub intervals: Vec<BootstrapInterval>,
}

/// Collects per-replicate results, indexed by replicate, into intervals.
/// Fails when more than a fifth of the replicates failed.
pub fn summarize_bootstrap(
    results: Vec<Result<Vec<(String, f64)>>>,
    seed: u64,
    level: f64,
) -> Result<BootstrapSummary> {
    check_level(level)?;
    let total = results.len();
    if total < 2 {
        bail!(InvalidParameter, "at least 2 bootstrap replicates are required, got {total}");
    }
    let mut names: Option<Vec<String>> = None;
    let mut estimates = Vec::new();
    let mut replicate_ids = Vec::new();
    let mut failures = Vec::new();
    for (b, r) in results.into_iter().enumerate() {
        match r {
            Ok(pairs) => {
                let (n, v): (Vec<String>, Vec<f64>) = pairs.into_iter().unzip();
                match &names {
                    None => names = Some(n),
                    Some(known) if *known != n => {
                        bail!(Dimension, "bootstrap replicate {b} reports a different parameter list")
                    }
                    Some(_) => {}
                }
                estimates.push(v);
                replicate_ids.push(b);
            }
            Err(e) => failures.push((b, format!("{e}"))),
        }
    }
    if failures.len() as f64 > MAX_FAILED_SHARE * total as f64 || estimates.is_empty() {
        return Err(Error::TooManyFailures { failed: failures.len(), total });
    }
    let names = names.unwrap_or_default();
    let mut intervals = Vec::with_capacity(names.len());
    let mut column = Vec::with_capacity(estimates.len());
    for (p, name) in names.iter().enumerate() {
        column.clear();
        column.extend(estimates.iter().map(|row| row[p]));
        let (lo, hi) = percentile_interval(&column, level)?;
        intervals.push(BootstrapInterval { name: name.clone(), lo, hi });
    }
    Ok(BootstrapSummary { replicates: total, seed, level, names, estimates, replicate_ids, failures, intervals })
}

/// Sequential percentile bootstrap. `fit_one` refits a resampled dataset and
/// returns its named point estimates.
pub fn bootstrap<F>(ds: &Dataset, replicates: usize, seed: u64, level: f64, mut fit_one: F) -> Result<BootstrapSummary>
where
    F: FnMut(&Dataset) -> Result<Vec<(String, f64)>>,
{
    if replicates < 2 {
        bail!(InvalidParameter, "at least 2 bootstrap replicates are required, got {replicates}");
    }
    let results = (0..replicates)
        .map(|b| ds.subset_rows(&bootstrap_indices(ds.n(), seed, b)).and_then(|d| fit_one(&d)))
        .collect();
    summarize_bootstrap(results, seed, level)
}

/// Parameter draws that can generate replicated outcomes.
pub trait Replicate {
    /// Row-major `n x m` outcome matrix; cells unobserved in `ds` hold NaN.
    fn replicate<R: Rng + ?Sized>(&self, ds: &Dataset, rng: &mut R) -> Result<Vec<f64>>;
}

impl Replicate for OutcomeTheta {
    /// Draws the component of each cell from `w_j`, then
    /// `y ~ N(mu_jh + lambda_j eta_i, psi2_jh)`.
    fn replicate<R: Rng + ?Sized>(&self, ds: &Dataset, rng: &mut R) -> Result<Vec<f64>> {
        let m = ds.m();
        let mut out = vec![f64::NAN; ds.n() * m];
        for i in 0..ds.n() {
            for &j in ds.outcomes_observed(i) {
                let h = draw_categorical(&self.w[j], rng)?;
                out[i * m + j] = draw_normal(self.mu[j][h] + self.lambda[j] * self.eta[i], self.psi2[j][h], rng)?;
            }
        }
        Ok(out)
    }
}

impl Replicate for LatentTheta {
    /// `y ~ N(nu_j + lambda_j eta_i, psi2_j)`; the factor draw already
    /// carries the mixture.
    fn replicate<R: Rng + ?Sized>(&self, ds: &Dataset, rng: &mut R) -> Result<Vec<f64>> {
        let m = ds.m();
        let mut out = vec![f64::NAN; ds.n() * m];
        for i in 0..ds.n() {
            for &j in ds.outcomes_observed(i) {
                out[i * m + j] = draw_normal(self.nu[j] + self.lambda[j] * self.eta[i], self.psi2[j], rng)?;
            }
        }
        Ok(out)
    }
}

/// Replicated dataset `s`, from stream `s` of `seed`.
pub fn predictive_draw<F>(fit: &F, ds: &Dataset, seed: u64, s: usize) -> Result<Vec<f64>>
where
    F: VariationalFit,
    F::Theta: Replicate,
{
    let mut rng = substream(seed, s as u64);
    let theta = fit.sample_theta(&mut rng)?;
    theta.replicate(ds, &mut rng)
}

/// `n_draws` replicated outcome matrices, each drawn from a fresh `theta ~ q`.
pub fn posterior_predictive<F>(fit: &F, ds: &Dataset, n_draws: usize, seed: u64) -> Result<Vec<Vec<f64>>>
where
    F: VariationalFit,
    F::Theta: Replicate,
{
    (0..n_draws).map(|s| predictive_draw(fit, ds, seed, s)).collect()
}

/// Gaussian kernel density estimate on an evenly spaced grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kde {
    pub bandwidth: f64,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
}

/// Silverman's rule `0.9 min(sd, IQR / 1.34) n^(-1/5)`; falls back to the
/// sd alone when the IQR is zero.
pub fn silverman_bandwidth(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        bail!(InvalidParameter, "bandwidth needs at least 2 values, got {}", values.len());
    }
    let (_, var) = crate::data::mean_var(values);
    let sd = var.sqrt();
    if !(sd > 0.0) || !sd.is_finite() {
        bail!(Domain, "bandwidth of a constant or non-finite sample");
    }
    let iqr = quantile_type7(values, 0.75)? - quantile_type7(values, 0.25)?;
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    Ok(0.9 * spread * (values.len() as f64).powf(-0.2))
}

/// Gaussian kernel density of `values` with bandwidth `bw` at each point.
pub fn kde_at(values: &[f64], bw: f64, points: &[f64]) -> Vec<f64> {
    let norm = 1.0 / (values.len() as f64 * bw * (2.0 * PI).sqrt());
    points
        .iter()
        .map(|&t| {
            let mut acc = 0.0;
            for v in values {
                let z = (t - v) / bw;
                acc += (-0.5 * z * z).exp();
            }
            acc * norm
        })
        .collect()
}

/// Density on [`KDE_GRID`] points spanning the data range padded by three
/// bandwidths on each side.
pub fn kde(values: &[f64], bandwidth: Option<f64>) -> Result<Kde> {
    if values.len() < 2 {
        bail!(InvalidParameter, "kde needs at least 2 values, got {}", values.len());
    }
    if values.iter().any(|v| !v.is_finite()) {
        bail!(Domain, "kde of non-finite values");
    }
    let bw = match bandwidth {
        Some(b) if b > 0.0 && b.is_finite() => b,
        Some(b) => bail!(InvalidParameter, "bandwidth must be positive, got {b}"),
        None => silverman_bandwidth(values)?,
    };
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min) - 3.0 * bw;
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 3.0 * bw;
    let step = (hi - lo) / (KDE_GRID - 1) as f64;
    let grid: Vec<f64> = (0..KDE_GRID).map(|g| lo + g as f64 * step).collect();
    let density = kde_at(values, bw, &grid);
    Ok(Kde { bandwidth: bw, grid, density })
}
