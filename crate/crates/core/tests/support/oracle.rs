//! Quadrature oracle for the coordinate updates.
//!
//! For each block the expected log joint density is written directly from the
//! model, with every other block entering through its current q-moments and
//! the block itself held at a point value. Normalizing `exp` of that function
//! numerically gives the optimal q-density of the block; its moments are
//! compared with what the closed-form update produced.
//!
//! Nothing here calls the update formulas' helpers: Gaussian blocks are
//! integrated on a grid, inverse-gamma blocks in `log v`, two-component
//! weights through a logistic substitution, and memberships by direct
//! normalization.

#![allow(dead_code)]

use std::f64::consts::PI;

use mixsem_core::latent::{self, LatentInit, LatentMixtureSpec, LatentQState};
use mixsem_core::math::{digamma, substream, SimRng};
use mixsem_core::outcome::{self, OutcomeInit, OutcomeMixtureSpec, OutcomeQState};
use mixsem_core::{Dataset, FitOptions};
use rand::Rng;

pub const TOL: f64 = 1e-6;
const HALF_LN_2PI: f64 = 0.9189385332046727;
const DROP: f64 = 60.0;
const GRID_1D: usize = 4001;
const GRID_2D: usize = 301;
const BOX_SD: f64 = 12.0;

#[derive(Debug, Clone)]
pub struct Mismatch {
    pub instance: usize,
    pub what: String,
    pub got: f64,
    pub want: f64,
}

#[derive(Debug, Default)]
pub struct OracleRun {
    pub checks: usize,
    pub worst: f64,
    pub mismatches: Vec<Mismatch>,
}

impl OracleRun {
    fn check(&mut self, instance: usize, what: impl FnOnce() -> String, got: f64, want: f64) {
        self.checks += 1;
        let err = (got - want).abs() / want.abs().max(1.0);
        if err.is_nan() || err > TOL {
            self.mismatches.push(Mismatch { instance, what: what(), got, want });
        }
        if err > self.worst || err.is_nan() {
            self.worst = err;
        }
    }

    fn check_gaussian(&mut self, instance: usize, what: &str, got: (f64, f64), want: (f64, f64)) {
        self.check(instance, || format!("{what} mean"), got.0, want.0);
        self.check(instance, || format!("{what} variance"), got.1, want.1);
    }

    pub fn merge(&mut self, other: OracleRun) {
        self.checks += other.checks;
        self.worst = self.worst.max(other.worst);
        self.mismatches.extend(other.mismatches);
    }
}

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

/// Maximizes a concave-ish `f` by damped Newton steps on central differences.
fn mode_1d(f: &mut impl FnMut(f64) -> f64, x0: f64) -> (f64, f64) {
    let mut x = x0;
    let mut fx = f(x);
    let mut curv = 1.0;
    for _ in 0..500 {
        let h = 1e-3 * (1.0 + x.abs());
        let (fp, fm) = (f(x + h), f(x - h));
        let g = (fp - fm) / (2.0 * h);
        let c = -(fp - 2.0 * fx + fm) / (h * h);
        curv = if c > 0.0 { c } else { curv.min(1.0) };
        let mut step = (g / curv).clamp(-5.0, 5.0);
        let mut accepted = false;
        for _ in 0..60 {
            let fnew = f(x + step);
            if fnew >= fx {
                x += step;
                fx = fnew;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted || step.abs() < 1e-12 * (1.0 + x.abs()) {
            break;
        }
    }
    (x, curv.max(1e-12))
}

/// `E[g_k(x)]` under the density proportional to `exp(f(x))` on the line.
fn expect_1d(mut f: impl FnMut(f64) -> f64, x0: f64, gs: &[&dyn Fn(f64) -> f64]) -> Vec<f64> {
    let (mode, curv) = mode_1d(&mut f, x0);
    let top = f(mode);
    let sd = 1.0 / curv.sqrt();
    let mut lo = mode;
    while top - f(lo) < DROP {
        lo -= sd;
    }
    let mut hi = mode;
    while top - f(hi) < DROP {
        hi += sd;
    }
    let dx = (hi - lo) / (GRID_1D - 1) as f64;
    let mut mass = 0.0;
    let mut acc = vec![0.0; gs.len()];
    for k in 0..GRID_1D {
        let x = lo + k as f64 * dx;
        let end = if k == 0 || k == GRID_1D - 1 { 0.5 } else { 1.0 };
        let w = end * (f(x) - top).exp();
        mass += w;
        for (a, g) in acc.iter_mut().zip(gs) {
            *a += w * g(x);
        }
    }
    acc.iter().map(|a| a / mass).collect()
}

/// Mean and covariance of a block of dimension one or two whose log density
/// is quadratic; the grid box spans `BOX_SD` marginal standard deviations.
fn gaussian_nd(mut f: impl FnMut(&[f64]) -> f64, x0: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let d = x0.len();
    if d == 1 {
        let mut g = |x: f64| f(&[x]);
        let m = expect_1d(&mut g, x0[0], &[&|x| x])[0];
        let v = expect_1d(&mut g, m, &[&|x| (x - m) * (x - m)])[0];
        return (vec![m], vec![vec![v]]);
    }
    assert_eq!(d, 2, "blocks of dimension above two are not needed here");
    // Newton on a quadratic: gradient and Hessian by central differences.
    let mut x = x0.to_vec();
    let mut hess = [[0.0; 2]; 2];
    for _ in 0..3 {
        let h = [1e-2 * (1.0 + x[0].abs()), 1e-2 * (1.0 + x[1].abs())];
        let at = |f: &mut dyn FnMut(&[f64]) -> f64, a: f64, b: f64| f(&[x[0] + a, x[1] + b]);
        let f0 = at(&mut f, 0.0, 0.0);
        let mut grad = [0.0; 2];
        for k in 0..2 {
            let e = |s: f64| if k == 0 { (s * h[0], 0.0) } else { (0.0, s * h[1]) };
            let (a, b) = e(1.0);
            let fp = at(&mut f, a, b);
            let (a, b) = e(-1.0);
            let fm = at(&mut f, a, b);
            grad[k] = (fp - fm) / (2.0 * h[k]);
            hess[k][k] = -(fp - 2.0 * f0 + fm) / (h[k] * h[k]);
        }
        let fpp = at(&mut f, h[0], h[1]);
        let fpm = at(&mut f, h[0], -h[1]);
        let fmp = at(&mut f, -h[0], h[1]);
        let fmm = at(&mut f, -h[0], -h[1]);
        hess[0][1] = -(fpp - fpm - fmp + fmm) / (4.0 * h[0] * h[1]);
        hess[1][0] = hess[0][1];
        let det = hess[0][0] * hess[1][1] - hess[0][1] * hess[1][0];
        let step = [
            (hess[1][1] * grad[0] - hess[0][1] * grad[1]) / det,
            (hess[0][0] * grad[1] - hess[1][0] * grad[0]) / det,
        ];
        x[0] += step[0];
        x[1] += step[1];
    }
    let det = hess[0][0] * hess[1][1] - hess[0][1] * hess[1][0];
    let sd = [(hess[1][1] / det).sqrt(), (hess[0][0] / det).sqrt()];
    let top = f(&x);
    let lo = [x[0] - BOX_SD * sd[0], x[1] - BOX_SD * sd[1]];
    let dx = [2.0 * BOX_SD * sd[0] / (GRID_2D - 1) as f64, 2.0 * BOX_SD * sd[1] / (GRID_2D - 1) as f64];
    let end = |k: usize| if k == 0 || k == GRID_2D - 1 { 0.5 } else { 1.0 };
    let mut mass = 0.0;
    let mut s1 = [0.0; 2];
    let mut s2 = [[0.0; 2]; 2];
    let mut pts = Vec::with_capacity(GRID_2D * GRID_2D);
    for a in 0..GRID_2D {
        for b in 0..GRID_2D {
            let p = [lo[0] + a as f64 * dx[0], lo[1] + b as f64 * dx[1]];
            let w = end(a) * end(b) * (f(&p) - top).exp();
            mass += w;
            s1[0] += w * p[0];
            s1[1] += w * p[1];
            pts.push((p, w));
        }
    }
    let m = [s1[0] / mass, s1[1] / mass];
    for (p, w) in &pts {
        let c = [p[0] - m[0], p[1] - m[1]];
        for r in 0..2 {
            for s in 0..2 {
                s2[r][s] += w * c[r] * c[s];
            }
        }
    }
    let cov = (0..2).map(|r| (0..2).map(|s| s2[r][s] / mass).collect()).collect();
    (m.to_vec(), cov)
}

/// `(E[1/v], E[log v])` for a positive block, integrated in `u = log v`.
fn positive_block(mut f: impl FnMut(f64) -> f64, v0: f64) -> (f64, f64) {
    let e = expect_1d(|u| f(u.exp()) + u, v0.ln(), &[&|u| (-u).exp(), &|u| u]);
    (e[0], e[1])
}

/// `(E[log w], E[log(1 - w)])` for the first of two weights, integrated in
/// `t = logit w`.
fn weight_block(mut f: impl FnMut(f64) -> f64, w0: f64) -> (f64, f64) {
    let log_s = |t: f64| -(-t).exp().ln_1p();
    let log_c = |t: f64| -t.exp().ln_1p();
    let e = expect_1d(
        |t| {
            let w = 1.0 / (1.0 + (-t).exp());
            f(w) + log_s(t) + log_c(t)
        },
        (w0 / (1.0 - w0)).ln(),
        &[&log_s, &log_c],
    );
    (e[0], e[1])
}

fn softmax(v: &[f64]) -> Vec<f64> {
    let top = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|x| (x - top).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| x / s).collect()
}

fn ig_log_mean(alpha: f64, beta: f64) -> f64 {
    beta.ln() - digamma(alpha).unwrap()
}

fn inv2(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    if m.len() == 1 {
        return vec![vec![1.0 / m[0][0]]];
    }
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    vec![vec![m[1][1] / det, -m[0][1] / det], vec![-m[1][0] / det, m[0][0] / det]]
}

/// `E[(b - c)' P (b - c)]` given `E b` and `E b b'`.
fn expected_prior_quad(p: &[Vec<f64>], eb: &[f64], ebb: &[Vec<f64>], c: &[f64]) -> f64 {
    let d = eb.len();
    let mut s = 0.0;
    for r in 0..d {
        for k in 0..d {
            s += p[r][k] * (ebb[k][r] - eb[r] * c[k] - c[r] * eb[k] + c[r] * c[k]);
        }
    }
    s
}

/// `E[(eta - x'b)^2]` from the moments of `eta` and `b`.
fn expected_reg_sq(x: &[f64], eta: (f64, f64), eb: &[f64], ebb: &[Vec<f64>]) -> f64 {
    let d = x.len();
    let xb: f64 = (0..d).map(|r| x[r] * eb[r]).sum();
    let xbbx: f64 = (0..d).flat_map(|r| (0..d).map(move |k| (r, k))).map(|(r, k)| x[r] * ebb[r][k] * x[k]).sum();
    eta.1 - 2.0 * eta.0 * xb + xbbx
}

/// `E[(y - c - l e)^2]` for independent `c`, `l`, `e` given first and second
/// moments.
fn expected_meas_sq(y: f64, c: (f64, f64), l: (f64, f64), e: (f64, f64)) -> f64 {
    y * y + c.1 + l.1 * e.1 - 2.0 * y * c.0 - 2.0 * y * l.0 * e.0 + 2.0 * c.0 * l.0 * e.0
}

fn point(v: f64) -> (f64, f64) {
    (v, v * v)
}

fn outer(b: &[f64]) -> Vec<Vec<f64>> {
    b.iter().map(|r| b.iter().map(|k| r * k).collect()).collect()
}

fn second_moment(mean: &[f64], cov: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = mean.len();
    (0..d).map(|r| (0..d).map(|k| cov[r][k] + mean[r] * mean[k]).collect()).collect()
}

// ---------------------------------------------------------------------------
// Random instances
// ---------------------------------------------------------------------------

fn normal(rng: &mut SimRng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

fn uniform(rng: &mut SimRng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

fn random_spd(rng: &mut SimRng, p: usize) -> Vec<Vec<f64>> {
    let a: Vec<Vec<f64>> = (0..p).map(|_| (0..p).map(|_| normal(rng)).collect()).collect();
    (0..p)
        .map(|r| {
            (0..p)
                .map(|k| {
                    let s: f64 = (0..p).map(|l| a[r][l] * a[k][l]).sum();
                    s + if r == k { uniform(rng, 0.5, 3.0) } else { 0.0 }
                })
                .collect()
        })
        .collect()
}

/// `N <= 5`, `M <= 2`, `p <= 2`, cells missing at random with every row
/// keeping at least one observed outcome.
fn random_dataset(rng: &mut SimRng) -> Dataset {
    let n = rng.random_range(2..=5);
    let m = rng.random_range(1..=2);
    let p = rng.random_range(1..=2);
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| normal(rng)).collect()).collect();
    let mut y = Vec::with_capacity(n);
    for xi in &x {
        let eta: f64 = xi.iter().sum::<f64>() + normal(rng);
        let mut row: Vec<Option<f64>> = (0..m)
            .map(|j| {
                let shift = if rng.random::<bool>() { 2.0 } else { -1.0 };
                let v = 0.5 * j as f64 + shift + (1.0 + 0.3 * j as f64) * eta + 0.7 * normal(rng);
                (rng.random::<f64>() > 0.25).then_some(v)
            })
            .collect();
        if row.iter().all(Option::is_none) {
            let j = rng.random_range(0..m);
            row[j] = Some(eta + normal(rng));
        }
        y.push(row);
    }
    let yn = (1..=m).map(|j| format!("y{j}")).collect();
    let xn = (1..=p).map(|k| format!("x{k}")).collect();
    Dataset::from_rows(&y, &x, yn, xn).expect("valid random dataset")
}

fn random_outcome_spec(rng: &mut SimRng, ds: &Dataset) -> OutcomeMixtureSpec {
    let h: Vec<usize> = (0..ds.m()).map(|_| rng.random_range(1..=2)).collect();
    let mut spec = OutcomeMixtureSpec::new(h.clone(), ds.p());
    spec.mu_lambda = uniform(rng, 0.5, 1.5);
    spec.sigma2_lambda = uniform(rng, 0.3, 3.0);
    spec.mu_mu = h.iter().map(|&hj| (0..hj).map(|_| uniform(rng, -2.0, 2.0)).collect()).collect();
    spec.sigma2_mu = h.iter().map(|&hj| (0..hj).map(|_| uniform(rng, 1.0, 20.0)).collect()).collect();
    spec.alpha_psi2 = uniform(rng, 1.2, 4.0);
    spec.beta_psi2 = uniform(rng, 0.5, 4.0);
    spec.alpha_sigma2 = uniform(rng, 1.2, 4.0);
    spec.beta_sigma2 = uniform(rng, 0.5, 4.0);
    spec.alpha_w = uniform(rng, 1.0, 10.0);
    spec.mu_beta = (0..ds.p()).map(|_| uniform(rng, -1.0, 1.0)).collect();
    spec.sigma_beta = random_spd(rng, ds.p());
    spec
}

fn random_latent_spec(rng: &mut SimRng, ds: &Dataset) -> LatentMixtureSpec {
    let mut spec = LatentMixtureSpec::new(2, ds.p());
    spec.mu_nu = uniform(rng, -1.0, 1.0);
    spec.sigma2_nu = uniform(rng, 1.0, 20.0);
    spec.mu_lambda = uniform(rng, 0.5, 1.5);
    spec.sigma2_lambda = uniform(rng, 0.3, 3.0);
    spec.alpha_psi2 = uniform(rng, 1.2, 4.0);
    spec.beta_psi2 = uniform(rng, 0.5, 4.0);
    spec.alpha_sigma2 = uniform(rng, 1.2, 4.0);
    spec.beta_sigma2 = uniform(rng, 0.5, 4.0);
    spec.alpha_w = uniform(rng, 1.0, 10.0);
    spec.mu_beta = (0..ds.p()).map(|_| uniform(rng, -1.0, 1.0)).collect();
    spec.sigma_beta = random_spd(rng, ds.p());
    spec.pin_nu1 = (rng.random::<f64>() < 0.3).then(|| uniform(rng, -0.5, 0.5));
    spec
}

// ---------------------------------------------------------------------------
// Outcome-mixture model
// ---------------------------------------------------------------------------

#[derive(Clone)]
struct OutcomeMoments {
    lam: Vec<(f64, f64)>,
    mu: Vec<Vec<(f64, f64)>>,
    inv_psi2: Vec<Vec<f64>>,
    log_psi2: Vec<Vec<f64>>,
    log_w: Vec<Vec<f64>>,
    a: Vec<Vec<Vec<f64>>>,
    eta: Vec<(f64, f64)>,
    beta: Vec<f64>,
    beta2: Vec<Vec<f64>>,
    inv_sigma2: f64,
    log_sigma2: f64,
}

impl OutcomeMoments {
    fn of(s: &OutcomeQState) -> Self {
        let comp = |f: &dyn Fn(&outcome::ComponentQ) -> f64| -> Vec<Vec<f64>> {
            s.outcomes.iter().map(|b| b.components.iter().map(f).collect()).collect()
        };
        Self {
            lam: s.outcomes.iter().map(|b| (b.mu_q_lambda, b.mu_q_lambda2)).collect(),
            mu: s.outcomes.iter().map(|b| b.components.iter().map(|c| (c.mu_q_mu, c.mu_q_mu2)).collect()).collect(),
            inv_psi2: comp(&|c| c.mu_q_inv_psi2),
            log_psi2: comp(&|c| c.mu_q_log_psi2),
            log_w: s.outcomes.iter().map(|b| b.mu_q_log_w.clone()).collect(),
            a: s.mu_q_a.clone(),
            eta: s.mu_q_eta.iter().zip(&s.mu_q_eta2).map(|(&m, &m2)| (m, m2)).collect(),
            beta: s.mu_q_beta.clone(),
            beta2: second_moment(&s.mu_q_beta, &s.sigma_q_beta),
            inv_sigma2: s.mu_q_inv_sigma2,
            log_sigma2: ig_log_mean(s.alpha_q_sigma2, s.beta_q_sigma2),
        }
    }

    /// Expected log joint density of data, memberships and parameters.
    fn log_joint(&self, spec: &OutcomeMixtureSpec, ds: &Dataset) -> f64 {
        let mut f = 0.0;
        for i in 0..ds.n() {
            for &j in ds.outcomes_observed(i) {
                let y = ds.y_obs(i, j);
                for h in 0..spec.h[j] {
                    let e2 = expected_meas_sq(y, self.mu[j][h], self.lam[j], self.eta[i]);
                    f += self.a[i][j][h]
                        * (-HALF_LN_2PI - 0.5 * self.log_psi2[j][h] - 0.5 * self.inv_psi2[j][h] * e2
                            + self.log_w[j][h]);
                }
            }
            let r2 = expected_reg_sq(ds.x_row(i), self.eta[i], &self.beta, &self.beta2);
            f += -HALF_LN_2PI - 0.5 * self.log_sigma2 - 0.5 * self.inv_sigma2 * r2;
        }
        for j in 0..ds.m() {
            if spec.h[j] > 1 {
                f += (spec.alpha_w - 1.0) * self.log_w[j].iter().sum::<f64>();
            }
            for h in 0..spec.h[j] {
                f += -(spec.alpha_psi2 + 1.0) * self.log_psi2[j][h] - spec.beta_psi2 * self.inv_psi2[j][h];
                let (m0, v0) = (spec.mu_mu[j][h], spec.sigma2_mu[j][h]);
                f += -(self.mu[j][h].1 - 2.0 * m0 * self.mu[j][h].0 + m0 * m0) / (2.0 * v0);
            }
            if j > 0 {
                let (m0, v0) = (spec.mu_lambda, spec.sigma2_lambda);
                f += -(self.lam[j].1 - 2.0 * m0 * self.lam[j].0 + m0 * m0) / (2.0 * v0);
            }
        }
        let prec = inv2(&spec.sigma_beta);
        f += -0.5 * expected_prior_quad(&prec, &self.beta, &self.beta2, &spec.mu_beta);
        f += -(spec.alpha_sigma2 + 1.0) * self.log_sigma2 - spec.beta_sigma2 * self.inv_sigma2;
        f
    }
}

fn check_outcome_instance(
    run: &mut OracleRun,
    instance: usize,
    spec: &OutcomeMixtureSpec,
    prior: &OutcomeMixtureSpec,
    ds: &Dataset,
    state: &mut OutcomeQState,
) {
    let id = instance;
    for j in 0..ds.m() {
        // memberships
        let pre = OutcomeMoments::of(state);
        let mut post = state.clone();
        outcome::update_responsibilities(&mut post, ds, j);
        for &i in ds.rows_observing(j) {
            let scores: Vec<f64> = (0..spec.h[j])
                .map(|h| {
                    let mut m = pre.clone();
                    m.a[i][j] = (0..spec.h[j]).map(|k| if k == h { 1.0 } else { 0.0 }).collect();
                    m.log_joint(prior, ds)
                })
                .collect();
            for (h, want) in softmax(&scores).into_iter().enumerate() {
                run.check(id, || format!("a[{i},{j},{h}]"), post.mu_q_a[i][j][h], want);
            }
        }
        *state = post;

        if j > 0 {
            let pre = OutcomeMoments::of(state);
            let mut post = state.clone();
            outcome::update_loadings(&mut post, spec, ds, j).unwrap();
            let (m, v) = {
                let (mean, cov) = gaussian_nd(
                    |x| {
                        let mut mm = pre.clone();
                        mm.lam[j] = point(x[0]);
                        mm.log_joint(prior, ds)
                    },
                    &[pre.lam[j].0],
                );
                (mean[0], cov[0][0])
            };
            let b = &post.outcomes[j];
            run.check_gaussian(id, &format!("lambda[{j}]"), (b.mu_q_lambda, b.sigma2_q_lambda), (m, v));
            run.check(id, || format!("lambda[{j}] second moment"), b.mu_q_lambda2, v + m * m);
            *state = post;
        }

        let pre = OutcomeMoments::of(state);
        let mut post = state.clone();
        outcome::update_intercepts(&mut post, spec, ds, j);
        for h in 0..spec.h[j] {
            let (mean, cov) = gaussian_nd(
                |x| {
                    let mut mm = pre.clone();
                    mm.mu[j][h] = point(x[0]);
                    mm.log_joint(prior, ds)
                },
                &[pre.mu[j][h].0],
            );
            let c = &post.outcomes[j].components[h];
            run.check_gaussian(id, &format!("mu[{j},{h}]"), (c.mu_q_mu, c.sigma2_q_mu), (mean[0], cov[0][0]));
        }
        *state = post;

        let pre = OutcomeMoments::of(state);
        let mut post = state.clone();
        outcome::update_noise_and_weights(&mut post, spec, ds, j).unwrap();
        for h in 0..spec.h[j] {
            let (inv, log) = positive_block(
                |v| {
                    let mut mm = pre.clone();
                    mm.inv_psi2[j][h] = 1.0 / v;
                    mm.log_psi2[j][h] = v.ln();
                    mm.log_joint(prior, ds)
                },
                1.0 / pre.inv_psi2[j][h],
            );
            let c = &post.outcomes[j].components[h];
            run.check(id, || format!("psi2[{j},{h}] E[1/v]"), c.mu_q_inv_psi2, inv);
            run.check(id, || format!("psi2[{j},{h}] E[log v]"), c.mu_q_log_psi2, log);
            run.check(id, || format!("psi2[{j},{h}] rate form"), ig_log_mean(c.alpha_q_psi2, c.beta_q_psi2), log);
        }
        if spec.h[j] == 2 {
            let (l1, l2) = weight_block(
                |w| {
                    let mut mm = pre.clone();
                    mm.log_w[j] = vec![w.ln(), (1.0 - w).ln()];
                    mm.log_joint(prior, ds)
                },
                pre.log_w[j][0].exp().clamp(0.05, 0.95),
            );
            let got = &post.outcomes[j].mu_q_log_w;
            run.check(id, || format!("w[{j}] E[log w1]"), got[0], l1);
            run.check(id, || format!("w[{j}] E[log w2]"), got[1], l2);
        } else {
            run.check(id, || format!("w[{j}] fixed"), post.outcomes[j].mu_q_log_w[0], 0.0);
        }
        *state = post;
    }

    let pre = OutcomeMoments::of(state);
    let mut post = state.clone();
    outcome::update_latents(&mut post, ds);
    for i in 0..ds.n() {
        let (mean, cov) = gaussian_nd(
            |x| {
                let mut mm = pre.clone();
                mm.eta[i] = point(x[0]);
                mm.log_joint(prior, ds)
            },
            &[pre.eta[i].0],
        );
        run.check_gaussian(id, &format!("eta[{i}]"), (post.mu_q_eta[i], post.sigma2_q_eta[i]), (mean[0], cov[0][0]));
    }
    *state = post;

    let pre = OutcomeMoments::of(state);
    let mut post = state.clone();
    outcome::update_regression(&mut post, spec, ds).unwrap();
    let (mean, cov) = gaussian_nd(
        |b| {
            let mut mm = pre.clone();
            mm.beta = b.to_vec();
            mm.beta2 = outer(b);
            mm.log_joint(prior, ds)
        },
        &pre.beta,
    );
    for r in 0..ds.p() {
        run.check(id, || format!("beta[{r}] mean"), post.mu_q_beta[r], mean[r]);
        for k in 0..ds.p() {
            run.check(id, || format!("beta cov[{r},{k}]"), post.sigma_q_beta[r][k], cov[r][k]);
        }
    }
    let mut mid = pre.clone();
    mid.beta = post.mu_q_beta.clone();
    mid.beta2 = second_moment(&post.mu_q_beta, &post.sigma_q_beta);
    let (inv, log) = positive_block(
        |v| {
            let mut mm = mid.clone();
            mm.inv_sigma2 = 1.0 / v;
            mm.log_sigma2 = v.ln();
            mm.log_joint(prior, ds)
        },
        1.0 / pre.inv_sigma2,
    );
    run.check(id, || "sigma2 E[1/v]".into(), post.mu_q_inv_sigma2, inv);
    run.check(id, || "sigma2 E[log v]".into(), ig_log_mean(post.alpha_q_sigma2, post.beta_q_sigma2), log);
    *state = post;
}

/// Checks every update of the outcome-mixture algorithm on `instances`
/// random problems, two full sweeps each, after a short burn-in.
pub fn run_outcome(instances: usize, seed: u64) -> OracleRun {
    run_outcome_against(instances, seed, |_| {})
}

/// As [`run_outcome`], but the oracle sees the prior after `tweak`; used to
/// show that the comparison detects a wrong update.
pub fn run_outcome_against(instances: usize, seed: u64, tweak: impl Fn(&mut OutcomeMixtureSpec)) -> OracleRun {
    let mut run = OracleRun::default();
    for t in 0..instances {
        let mut rng = substream(seed, t as u64);
        let ds = random_dataset(&mut rng);
        let spec = random_outcome_spec(&mut rng, &ds);
        let mut oracle_spec = spec.clone();
        tweak(&mut oracle_spec);
        let mut state = outcome::init_state(&spec, &ds, &OutcomeInit::Default).unwrap();
        for _ in 0..rng.random_range(1..=4) {
            outcome::sweep(&mut state, &spec, &ds).unwrap();
        }
        for _ in 0..2 {
            check_outcome_instance(&mut run, t, &spec, &oracle_spec, &ds, &mut state);
        }
    }
    run
}

// ---------------------------------------------------------------------------
// Latent-mixture model
// ---------------------------------------------------------------------------

#[derive(Clone)]
struct LatentMoments {
    nu: Vec<(f64, f64)>,
    lam: Vec<(f64, f64)>,
    inv_psi2: Vec<f64>,
    log_psi2: Vec<f64>,
    eta: Vec<(f64, f64)>,
    a: Vec<Vec<f64>>,
    beta: Vec<Vec<f64>>,
    beta2: Vec<Vec<Vec<f64>>>,
    inv_sigma2: Vec<f64>,
    log_sigma2: Vec<f64>,
    log_w: Vec<f64>,
}

impl LatentMoments {
    fn of(s: &LatentQState) -> Self {
        Self {
            nu: s.outcomes.iter().map(|o| (o.mu_q_nu, o.mu_q_nu2)).collect(),
            lam: s.outcomes.iter().map(|o| (o.mu_q_lambda, o.mu_q_lambda2)).collect(),
            inv_psi2: s.outcomes.iter().map(|o| o.mu_q_inv_psi2).collect(),
            log_psi2: s.outcomes.iter().map(|o| ig_log_mean(o.alpha_q_psi2, o.beta_q_psi2)).collect(),
            eta: s.mu_q_eta.iter().zip(&s.mu_q_eta2).map(|(&m, &m2)| (m, m2)).collect(),
            a: s.mu_q_a.clone(),
            beta: s.components.iter().map(|c| c.mu_q_beta.clone()).collect(),
            beta2: s.components.iter().map(|c| second_moment(&c.mu_q_beta, &c.sigma_q_beta)).collect(),
            inv_sigma2: s.components.iter().map(|c| c.mu_q_inv_sigma2).collect(),
            log_sigma2: s.components.iter().map(|c| c.mu_q_log_sigma2).collect(),
            log_w: s.mu_q_log_w.clone(),
        }
    }

    fn log_joint(&self, spec: &LatentMixtureSpec, ds: &Dataset) -> f64 {
        let kk = spec.k;
        let mut f = 0.0;
        for i in 0..ds.n() {
            for &j in ds.outcomes_observed(i) {
                let e2 = expected_meas_sq(ds.y_obs(i, j), self.nu[j], self.lam[j], self.eta[i]);
                f += -HALF_LN_2PI - 0.5 * self.log_psi2[j] - 0.5 * self.inv_psi2[j] * e2;
            }
            for k in 0..kk {
                let r2 = expected_reg_sq(ds.x_row(i), self.eta[i], &self.beta[k], &self.beta2[k]);
                f += self.a[i][k]
                    * (-HALF_LN_2PI - 0.5 * self.log_sigma2[k] - 0.5 * self.inv_sigma2[k] * r2 + self.log_w[k]);
            }
        }
        if kk > 1 {
            f += (spec.alpha_w - 1.0) * self.log_w.iter().sum::<f64>();
        }
        let prec = inv2(&spec.sigma_beta);
        for k in 0..kk {
            f += -0.5 * expected_prior_quad(&prec, &self.beta[k], &self.beta2[k], &spec.mu_beta);
            f += -(spec.alpha_sigma2 + 1.0) * self.log_sigma2[k] - spec.beta_sigma2 * self.inv_sigma2[k];
        }
        for j in 0..ds.m() {
            f += -(spec.alpha_psi2 + 1.0) * self.log_psi2[j] - spec.beta_psi2 * self.inv_psi2[j];
            if !(j == 0 && spec.pin_nu1.is_some()) {
                let (m0, v0) = (spec.mu_nu, spec.sigma2_nu);
                f += -(self.nu[j].1 - 2.0 * m0 * self.nu[j].0 + m0 * m0) / (2.0 * v0);
            }
            if j > 0 {
                let (m0, v0) = (spec.mu_lambda, spec.sigma2_lambda);
                f += -(self.lam[j].1 - 2.0 * m0 * self.lam[j].0 + m0 * m0) / (2.0 * v0);
            }
        }
        f
    }
}

fn check_latent_instance(
    run: &mut OracleRun,
    instance: usize,
    spec: &LatentMixtureSpec,
    prior: &LatentMixtureSpec,
    ds: &Dataset,
    state: &mut LatentQState,
) {
    let id = instance;
    let kk = spec.k;

    let pre = LatentMoments::of(state);
    let mut post = state.clone();
    latent::update_components(&mut post, spec, ds).unwrap();
    for k in 0..kk {
        let (mean, cov) = gaussian_nd(
            |b| {
                let mut mm = pre.clone();
                mm.beta[k] = b.to_vec();
                mm.beta2[k] = outer(b);
                mm.log_joint(prior, ds)
            },
            &pre.beta[k],
        );
        let c = &post.components[k];
        for r in 0..ds.p() {
            run.check(id, || format!("beta[{k}][{r}] mean"), c.mu_q_beta[r], mean[r]);
            for l in 0..ds.p() {
                run.check(id, || format!("beta[{k}] cov[{r},{l}]"), c.sigma_q_beta[r][l], cov[r][l]);
            }
        }
        let mut mid = pre.clone();
        mid.beta[k] = c.mu_q_beta.clone();
        mid.beta2[k] = second_moment(&c.mu_q_beta, &c.sigma_q_beta);
        let (inv, log) = positive_block(
            |v| {
                let mut mm = mid.clone();
                mm.inv_sigma2[k] = 1.0 / v;
                mm.log_sigma2[k] = v.ln();
                mm.log_joint(prior, ds)
            },
            1.0 / pre.inv_sigma2[k],
        );
        run.check(id, || format!("sigma2[{k}] E[1/v]"), c.mu_q_inv_sigma2, inv);
        run.check(id, || format!("sigma2[{k}] E[log v]"), c.mu_q_log_sigma2, log);
    }
    if kk == 2 {
        let (l1, l2) = weight_block(
            |w| {
                let mut mm = pre.clone();
                mm.log_w = vec![w.ln(), (1.0 - w).ln()];
                mm.log_joint(prior, ds)
            },
            pre.log_w[0].exp().clamp(0.05, 0.95),
        );
        run.check(id, || "w E[log w1]".into(), post.mu_q_log_w[0], l1);
        run.check(id, || "w E[log w2]".into(), post.mu_q_log_w[1], l2);
    }
    *state = post;

    let pre = LatentMoments::of(state);
    let mut post = state.clone();
    latent::update_individuals(&mut post, ds).unwrap();
    for i in 0..ds.n() {
        let scores: Vec<f64> = (0..kk)
            .map(|k| {
                let mut m = pre.clone();
                m.a[i] = (0..kk).map(|l| if l == k { 1.0 } else { 0.0 }).collect();
                m.log_joint(prior, ds)
            })
            .collect();
        for (k, want) in softmax(&scores).into_iter().enumerate() {
            run.check(id, || format!("a[{i},{k}]"), post.mu_q_a[i][k], want);
        }
        let mut mid = pre.clone();
        mid.a[i] = post.mu_q_a[i].clone();
        let (mean, cov) = gaussian_nd(
            |x| {
                let mut mm = mid.clone();
                mm.eta[i] = point(x[0]);
                mm.log_joint(prior, ds)
            },
            &[pre.eta[i].0],
        );
        run.check_gaussian(id, &format!("eta[{i}]"), (post.mu_q_eta[i], post.sigma2_q_eta[i]), (mean[0], cov[0][0]));
    }
    *state = post;

    for j in 0..ds.m() {
        if j > 0 {
            let pre = LatentMoments::of(state);
            let mut post = state.clone();
            latent::update_loading(&mut post, spec, ds, j).unwrap();
            let (mean, cov) = gaussian_nd(
                |x| {
                    let mut mm = pre.clone();
                    mm.lam[j] = point(x[0]);
                    mm.log_joint(prior, ds)
                },
                &[pre.lam[j].0],
            );
            let o = &post.outcomes[j];
            run.check_gaussian(id, &format!("lambda[{j}]"), (o.mu_q_lambda, o.sigma2_q_lambda), (mean[0], cov[0][0]));
            *state = post;
        }

        let pre = LatentMoments::of(state);
        let mut post = state.clone();
        latent::update_intercept(&mut post, spec, ds, j);
        if j == 0 && spec.pin_nu1.is_some() {
            let want = spec.pin_nu1.unwrap();
            run.check(id, || "nu[0] pinned".into(), post.outcomes[0].mu_q_nu, want);
            run.check(id, || "nu[0] pinned variance".into(), post.outcomes[0].sigma2_q_nu, 0.0);
        } else {
            let (mean, cov) = gaussian_nd(
                |x| {
                    let mut mm = pre.clone();
                    mm.nu[j] = point(x[0]);
                    mm.log_joint(prior, ds)
                },
                &[pre.nu[j].0],
            );
            let o = &post.outcomes[j];
            run.check_gaussian(id, &format!("nu[{j}]"), (o.mu_q_nu, o.sigma2_q_nu), (mean[0], cov[0][0]));
        }
        *state = post;

        let pre = LatentMoments::of(state);
        let mut post = state.clone();
        latent::update_noise(&mut post, spec, ds, j);
        let (inv, log) = positive_block(
            |v| {
                let mut mm = pre.clone();
                mm.inv_psi2[j] = 1.0 / v;
                mm.log_psi2[j] = v.ln();
                mm.log_joint(prior, ds)
            },
            1.0 / pre.inv_psi2[j],
        );
        let o = &post.outcomes[j];
        run.check(id, || format!("psi2[{j}] E[1/v]"), o.mu_q_inv_psi2, inv);
        run.check(id, || format!("psi2[{j}] E[log v]"), ig_log_mean(o.alpha_q_psi2, o.beta_q_psi2), log);
        *state = post;
    }
}

/// Checks every update of the latent-mixture algorithm (`K = 2`) on
/// `instances` random problems.
pub fn run_latent(instances: usize, seed: u64) -> OracleRun {
    run_latent_against(instances, seed, |_| {})
}

pub fn run_latent_against(instances: usize, seed: u64, tweak: impl Fn(&mut LatentMixtureSpec)) -> OracleRun {
    let mut run = OracleRun::default();
    for t in 0..instances {
        let mut rng = substream(seed, 1_000 + t as u64);
        let ds = random_dataset(&mut rng);
        let spec = random_latent_spec(&mut rng, &ds);
        let mut oracle_spec = spec.clone();
        tweak(&mut oracle_spec);
        let mut state = latent::init_state(&spec, &ds, &LatentInit::Spread, &FitOptions::default()).unwrap();
        for _ in 0..rng.random_range(1..=4) {
            latent::sweep(&mut state, &spec, &ds).unwrap();
        }
        for _ in 0..2 {
            check_latent_instance(&mut run, t, &spec, &oracle_spec, &ds, &mut state);
        }
    }
    run
}
