//! SEM with a Gaussian mixture on each outcome.
//!
//! ```text
//! y_ij | a_ij ~ N(mu_jh + lambda_j eta_i, psi2_jh)  where a_ijh = 1
//! a_ij ~ Multinomial(1; w_j),  w_j ~ Dirichlet(H_j, alpha_w)
//! eta_i ~ N(x_i' beta, sigma2),  lambda_1 = 1
//! ```
//!
//! The variational family factorizes over `mu_jh`, `psi2_jh`, `lambda_j`
//! (`j >= 2`), each `eta_i`, each observed `a_ij`, each `w_j`, `beta` and
//! `sigma2`. [`fit`] cycles the closed-form updates in [`updates`].

pub(crate) mod spec;
mod state;
pub mod updates;

pub use spec::OutcomeMixtureSpec;
pub use state::{ComponentQ, OutcomeBlockQ, OutcomeInit, OutcomeQState};
pub use updates::{
    init_state, sweep, update_intercepts, update_latents, update_loadings, update_noise_and_weights,
    update_regression, update_responsibilities,
};

use crate::data::Dataset;
use crate::error::Result;
use crate::fit::{iterate, FitOptions, FitReport};

/// Coordinate ascent from `init` until convergence or `options.max_iter`.
/// Hitting `max_iter` is reported through [`FitReport::converged`], not as an error.
pub fn fit(
    spec: &OutcomeMixtureSpec,
    ds: &Dataset,
    options: &FitOptions,
    init: &OutcomeInit,
) -> Result<(OutcomeQState, FitReport)> {
    spec.validate(ds)?;
    let mut state = init_state(spec, ds, init)?;
    let report = iterate(&mut state, options, |s| sweep(s, spec, ds), |s, out| s.flatten_into(out))?;
    Ok((state, report))
}
