//! The quadratic-form expectation `G` against its literal definition and
//! against Monte Carlo, on random SPD covariances of dimension up to five.

#![allow(dead_code)]

use std::f64::consts::PI;

use mixsem_core::math::{g_quadratic, substream, DMatrix, NaturalGaussianParams, SimRng};
use rand::Rng;

pub const IDENTITY_TOL: f64 = 1e-12;
pub const MC_SE: f64 = 4.0;
const MC_DRAWS: usize = 100_000;

#[derive(Debug)]
pub struct GCase {
    pub d: usize,
    pub closed_form: f64,
    pub literal: f64,
    pub mc_mean: f64,
    pub mc_se: f64,
}

impl GCase {
    pub fn identity_error(&self) -> f64 {
        (self.closed_form - self.literal).abs() / self.literal.abs().max(1.0)
    }

    pub fn mc_z(&self) -> f64 {
        (self.mc_mean - self.closed_form).abs() / self.mc_se
    }
}

fn normal(rng: &mut SimRng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

type Mat = Vec<Vec<f64>>;

fn matmul(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    let m = b[0].len();
    (0..n).map(|i| (0..m).map(|j| (0..b.len()).map(|k| a[i][k] * b[k][j]).sum()).collect()).collect()
}

fn matvec(a: &Mat, v: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

/// Gauss-Jordan with partial pivoting.
fn invert(a: &Mat) -> Mat {
    let n = a.len();
    let mut m: Mat = a.iter().enumerate().map(|(i, r)| {
        let mut row = r.clone();
        row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
        row
    }).collect();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs())).unwrap();
        m.swap(c, p);
        let piv = m[c][c];
        for v in m[c].iter_mut() {
            *v /= piv;
        }
        for r in 0..n {
            if r != c {
                let f = m[r][c];
                let pivot_row = m[c].clone();
                for (v, pv) in m[r].iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

fn cholesky(a: &Mat) -> Mat {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            l[i][j] = if i == j { (a[i][i] - s).sqrt() } else { (a[i][j] - s) / l[j][j] };
        }
    }
    l
}

fn random_spd(rng: &mut SimRng, d: usize) -> Mat {
    let a: Mat = (0..d).map(|_| (0..d).map(|_| normal(rng)).collect()).collect();
    (0..d)
        .map(|i| (0..d).map(|j| (0..d).map(|k| a[i][k] * a[j][k]).sum::<f64>() + if i == j { 0.5 } else { 0.0 }).collect())
        .collect()
}

fn random_symmetric(rng: &mut SimRng, d: usize) -> Mat {
    let mut q = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..=i {
            let v = normal(rng);
            q[i][j] = v;
            q[j][i] = v;
        }
    }
    q
}

/// The definition with `V = vec^{-1}(v2)` inverted directly.
fn literal(v1: &[f64], v2: &Mat, q: &Mat, r: &[f64], s: f64) -> f64 {
    let d = v1.len();
    let vi = invert(v2);
    let viv1 = matvec(&vi, v1);
    let mut inner: Mat = (0..d).map(|i| (0..d).map(|j| v1[i] * viv1[j]).collect()).collect();
    for (i, row) in inner.iter_mut().enumerate() {
        row[i] -= 2.0;
    }
    let prod = matmul(&matmul(q, &vi), &inner);
    let trace: f64 = (0..d).map(|i| prod[i][i]).sum();
    let rv: f64 = r.iter().zip(&viv1).map(|(a, b)| a * b).sum();
    -trace / 8.0 - 0.5 * rv - 0.5 * s
}

pub fn run(cases: usize, seed: u64) -> Vec<GCase> {
    (0..cases)
        .map(|t| {
            let mut rng = substream(seed, t as u64);
            let d = 1 + t % 5;
            let cov = random_spd(&mut rng, d);
            let mean: Vec<f64> = (0..d).map(|_| 2.0 * normal(&mut rng)).collect();
            let q = random_symmetric(&mut rng, d);
            let r: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
            let s = normal(&mut rng);

            let prec = invert(&cov);
            let v1 = matvec(&prec, &mean);
            let v2: Mat = prec.iter().map(|row| row.iter().map(|x| -0.5 * x).collect()).collect();
            let params = NaturalGaussianParams {
                v1: v1.clone(),
                v2: (0..d).flat_map(|j| (0..d).map(move |i| (i, j))).map(|(i, j)| v2[i][j]).collect(),
            };
            let qm = DMatrix::from_fn(d, d, |i, j| q[i][j]);
            let closed_form = g_quadratic(&params, &qm, &r, s).expect("invertible");
            let lit = literal(&v1, &v2, &q, &r, s);

            let l = cholesky(&cov);
            let mut sum = 0.0;
            let mut sum2 = 0.0;
            for _ in 0..MC_DRAWS {
                let z: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
                let th: Vec<f64> = (0..d).map(|i| mean[i] + (0..=i).map(|k| l[i][k] * z[k]).sum::<f64>()).collect();
                let qf: f64 = (0..d).map(|i| (0..d).map(|j| th[i] * q[i][j] * th[j]).sum::<f64>()).sum();
                let rt: f64 = r.iter().zip(&th).map(|(a, b)| a * b).sum();
                let v = -0.5 * (qf - 2.0 * rt + s);
                sum += v;
                sum2 += v * v;
            }
            let n = MC_DRAWS as f64;
            let mc_mean = sum / n;
            let var = (sum2 / n - mc_mean * mc_mean) * n / (n - 1.0);
            GCase { d, closed_form, literal: lit, mc_mean, mc_se: (var / n).sqrt() }
        })
        .collect()
}
