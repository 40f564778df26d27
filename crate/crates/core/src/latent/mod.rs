//! SEM with a Gaussian mixture on the latent factor.
//!
//! ```text
//! y_ij ~ N(nu_j + lambda_j eta_i, psi2_j),  lambda_1 = 1
//! eta_i | a_i ~ N(x_i' beta_k, sigma2_k)  where a_ik = 1
//! a_i ~ Multinomial(1; w),  w ~ Dirichlet(K, alpha_w)
//! ```
//!
//! Harder to identify than the outcome-mixture model; initialize with
//! [`LatentInit::MixtureRegression`] or pin `nu_1`.

pub(crate) mod spec;
mod state;
pub mod updates;

pub use spec::LatentMixtureSpec;
pub use state::{LatentComponentQ, LatentInit, LatentQState, MeasurementQ};
pub use updates::{
    init_state, sweep, update_components, update_individuals, update_intercept, update_latent, update_loading,
    update_noise, update_responsibility,
};

use crate::data::Dataset;
use crate::error::Result;
use crate::fit::{iterate, FitOptions, FitReport};

/// Coordinate ascent from `init` until convergence or `options.max_iter`.
pub fn fit_latent(
    spec: &LatentMixtureSpec,
    ds: &Dataset,
    options: &FitOptions,
    init: &LatentInit,
) -> Result<(LatentQState, FitReport)> {
    let mut state = init_state(spec, ds, init, options)?;
    let report = iterate(&mut state, options, |s| sweep(s, spec, ds), |s, out| s.flatten_into(out))?;
    Ok((state, report))
}
