//! A single-component latent mixture and an outcome mixture with one
//! component per outcome describe the same Gaussian model. With matching
//! priors both algorithms must reach the same fixed point.

#![allow(dead_code)]

use mixsem_core::latent::{fit_latent, LatentInit, LatentMixtureSpec, LatentQState};
use mixsem_core::math::substream;
use mixsem_core::outcome::{fit, OutcomeInit, OutcomeMixtureSpec, OutcomeQState};
use mixsem_core::sim::{simulate, CovariateLaw, SimulationTruth};
use mixsem_core::{Dataset, FitOptions};
use rand::Rng;

pub const TOL: f64 = 1e-6;

/// Fits are run to this relative change so that the distance between the
/// two fixed points is far below [`TOL`].
const FIT: FitOptions = FitOptions { tol: 1e-13, max_iter: 50_000, seed: 0 };

#[derive(Debug)]
pub struct Reduction {
    pub dataset: usize,
    pub worst: f64,
    pub worst_name: String,
    pub sweeps: (usize, usize),
}

fn random_dataset(seed: u64, t: usize) -> Dataset {
    let mut rng = substream(seed, t as u64);
    let m = rng.random_range(2..=4);
    let p = rng.random_range(1..=2);
    let truth = SimulationTruth {
        beta: (0..p).map(|_| rng.random_range(-2.0..2.0)).collect(),
        lambda: (0..m).map(|j| if j == 0 { 1.0 } else { rng.random_range(0.3..1.5) }).collect(),
        mu: (0..m).map(|_| vec![rng.random_range(-3.0..3.0)]).collect(),
        psi2: (0..m).map(|_| vec![rng.random_range(0.5..3.0)]).collect(),
        w: vec![vec![1.0]; m],
        sigma2: rng.random_range(0.5..2.0),
        covariates: (0..p)
            .map(|k| if k == 0 { CovariateLaw::Normal { mean: 1.0, variance: 2.0 } } else { CovariateLaw::Uniform { low: 0.0, high: 3.0 } })
            .collect(),
    };
    let n = rng.random_range(60..=200);
    simulate(&truth, n, rng.random(), 0.1).expect("simulation").dataset
}

fn specs(ds: &Dataset) -> (OutcomeMixtureSpec, LatentMixtureSpec) {
    let outcome = OutcomeMixtureSpec::new(vec![1; ds.m()], ds.p()).with_shared_intercept_prior(0.5, 50.0);
    let mut latent = LatentMixtureSpec::new(1, ds.p());
    latent.mu_nu = 0.5;
    latent.sigma2_nu = 50.0;
    latent.mu_lambda = outcome.mu_lambda;
    latent.sigma2_lambda = outcome.sigma2_lambda;
    latent.alpha_psi2 = outcome.alpha_psi2;
    latent.beta_psi2 = outcome.beta_psi2;
    latent.alpha_sigma2 = outcome.alpha_sigma2;
    latent.beta_sigma2 = outcome.beta_sigma2;
    latent.mu_beta = outcome.mu_beta.clone();
    latent.sigma_beta = outcome.sigma_beta.clone();
    (outcome, latent)
}

/// Named moments shared by the two parameterizations.
fn shared(o: &OutcomeQState, l: &LatentQState) -> Vec<(String, f64, f64)> {
    let mut v = Vec::new();
    for (j, (b, m)) in o.outcomes.iter().zip(&l.outcomes).enumerate() {
        let c = &b.components[0];
        v.push((format!("intercept[{j}] mean"), c.mu_q_mu, m.mu_q_nu));
        v.push((format!("intercept[{j}] variance"), c.sigma2_q_mu, m.sigma2_q_nu));
        v.push((format!("lambda[{j}] mean"), b.mu_q_lambda, m.mu_q_lambda));
        v.push((format!("lambda[{j}] variance"), b.sigma2_q_lambda, m.sigma2_q_lambda));
        v.push((format!("psi2[{j}] shape"), c.alpha_q_psi2, m.alpha_q_psi2));
        v.push((format!("psi2[{j}] rate"), c.beta_q_psi2, m.beta_q_psi2));
        v.push((format!("psi2[{j}] E[1/v]"), c.mu_q_inv_psi2, m.mu_q_inv_psi2));
    }
    for i in 0..o.n() {
        v.push((format!("eta[{i}] mean"), o.mu_q_eta[i], l.mu_q_eta[i]));
        v.push((format!("eta[{i}] variance"), o.sigma2_q_eta[i], l.sigma2_q_eta[i]));
    }
    let c = &l.components[0];
    for r in 0..o.mu_q_beta.len() {
        v.push((format!("beta[{r}] mean"), o.mu_q_beta[r], c.mu_q_beta[r]));
        for k in 0..o.mu_q_beta.len() {
            v.push((format!("beta cov[{r},{k}]"), o.sigma_q_beta[r][k], c.sigma_q_beta[r][k]));
        }
    }
    v.push(("sigma2 shape".into(), o.alpha_q_sigma2, c.alpha_q_sigma2));
    v.push(("sigma2 rate".into(), o.beta_q_sigma2, c.beta_q_sigma2));
    v
}

/// Largest relative disagreement per dataset.
pub fn run(datasets: usize, seed: u64) -> Vec<Reduction> {
    (0..datasets)
        .map(|t| {
            let ds = random_dataset(seed, t);
            let (os, ls) = specs(&ds);
            let (o, ro) = fit(&os, &ds, &FIT, &OutcomeInit::Default).expect("outcome fit");
            let (l, rl) = fit_latent(&ls, &ds, &FIT, &LatentInit::MixtureRegression).expect("latent fit");
            assert!(ro.converged && rl.converged, "dataset {t} did not converge");
            let mut out = Reduction { dataset: t, worst: 0.0, worst_name: String::new(), sweeps: (ro.iterations, rl.iterations) };
            for (name, a, b) in shared(&o, &l) {
                let e = (a - b).abs() / b.abs().max(1.0);
                if e > out.worst || e.is_nan() {
                    out.worst = e;
                    out.worst_name = name;
                }
            }
            out
        })
        .collect()
}
