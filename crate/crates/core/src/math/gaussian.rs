//! Multivariate Gaussian parameterizations and the expectation of a
//! Gaussian quadratic form.
//!
//! For `theta ~ N(mu, Sigma)` the natural parameters are `v1 = Sigma^{-1} mu`
//! and `v2 = vec(-Sigma^{-1} / 2)`. The function
//!
//! ```text
//! G(v1, v2; Q, r, s) = -(1/8) tr(Q V^{-1} [v1 v1' V^{-1} - 2I]) - (1/2) r' V^{-1} v1 - s/2,
//! V = vec^{-1}(v2)
//! ```
//!
//! equals `E[-(theta' Q theta - 2 r' theta + s) / 2]`. With `mu = -V^{-1} v1 / 2`
//! and `Sigma = -V^{-1} / 2` it rearranges to
//! `-(mu' Q mu + tr(Q Sigma) - 2 r' mu + s) / 2`, which is what is evaluated.
//! The rearrangement is purely algebraic, so it also holds for a `V` that is
//! not negative definite.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::math::linalg::{dot, quad_form, spd_inverse, symmetrize};

/// Natural parameters `(v1, v2)` of a `d`-variate Gaussian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaturalGaussianParams {
    /// `Sigma^{-1} mu`, length `d`.
    pub v1: Vec<f64>,
    /// Column-major `vec(-Sigma^{-1} / 2)`, length `d^2`.
    pub v2: Vec<f64>,
}

/// Mean and covariance of a Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMoments {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl NaturalGaussianParams {
    /// Natural parameters of `N(mean, cov)`; `cov` must be SPD.
    pub fn from_moments(mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            bail!(Dimension, "covariance is {}x{} for a mean of length {}", cov.nrows(), cov.ncols(), mean.len());
        }
        let precision = spd_inverse(cov, "covariance")?;
        let v1 = &precision * mean;
        let v2 = precision * -0.5;
        Ok(Self { v1: v1.iter().copied().collect(), v2: v2.as_slice().to_vec() })
    }

    pub fn dim(&self) -> usize {
        self.v1.len()
    }

    /// `vec^{-1}(v2)`.
    pub fn v2_matrix(&self) -> Result<DMatrix<f64>> {
        let d = self.dim();
        if self.v2.len() != d * d {
            bail!(Dimension, "v2 has length {} but v1 has length {d}", self.v2.len());
        }
        Ok(DMatrix::from_column_slice(d, d, &self.v2))
    }

    /// Mean/covariance form, valid when `vec^{-1}(v2)` is negative definite.
    pub fn to_moments(&self) -> Result<GaussianMoments> {
        let v = self.v2_matrix()?;
        let precision = v * -2.0;
        let cov = spd_inverse(&precision, "-2 vec^-1(v2)")?;
        let mean = &cov * DVector::from_column_slice(&self.v1);
        Ok(GaussianMoments { mean, cov })
    }

    /// `(mu, Sigma) = (-V^{-1} v1 / 2, -V^{-1} / 2)` for any invertible
    /// symmetric `V`, without a definiteness requirement.
    fn algebraic_moments(&self) -> Result<GaussianMoments> {
        let v = self.v2_matrix()?;
        let d = self.dim();
        let Some(mut inv) = v.clone().lu().try_inverse() else {
            bail!(Singular, "vec^-1(v2) is not invertible");
        };
        if d > 0 && !inv.iter().all(|x| x.is_finite()) {
            bail!(Singular, "vec^-1(v2) is not invertible");
        }
        symmetrize(&mut inv);
        let cov = inv * -0.5;
        let mean = &cov * DVector::from_column_slice(&self.v1);
        Ok(GaussianMoments { mean, cov })
    }
}

impl GaussianMoments {
    /// `E[-(theta' Q theta - 2 r' theta + s) / 2]`.
    pub fn g(&self, q: &DMatrix<f64>, r: &[f64], s: f64) -> f64 {
        let mean = self.mean.as_slice();
        let trace = q.component_mul(&self.cov).sum();
        -0.5 * (quad_form(q, mean) + trace - 2.0 * dot(r, mean) + s)
    }

    /// The same expectation for the rank-one case `Q = x x'`, `r = m x`,
    /// which is how the regression blocks use it.
    pub fn g_outer(&self, x: &[f64], m: f64, s: f64) -> f64 {
        let xm = dot(x, self.mean.as_slice());
        -0.5 * (xm * xm + quad_form(&self.cov, x) - 2.0 * m * xm + s)
    }
}

/// `G(params; Q, r, s)` evaluated through the mean/covariance form.
pub fn g_quadratic(params: &NaturalGaussianParams, q: &DMatrix<f64>, r: &[f64], s: f64) -> Result<f64> {
    let d = params.dim();
    if q.nrows() != d || q.ncols() != d || r.len() != d {
        bail!(Dimension, "G expects Q {d}x{d} and r of length {d}");
    }
    Ok(params.algebraic_moments()?.g(q, r, s))
}

/// `-(mu' Q mu + tr(Q Sigma) - 2 r' mu + s) / 2` from moments directly.
pub fn expected_quadratic_form(mean: &[f64], cov: &DMatrix<f64>, q: &DMatrix<f64>, r: &[f64], s: f64) -> f64 {
    let trace = q.component_mul(cov).sum();
    -0.5 * (quad_form(q, mean) + trace - 2.0 * dot(r, mean) + s)
}
