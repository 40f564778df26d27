//! Mean-field variational Bayes for structural equation models whose
//! outcomes, or whose latent factor, follow a Gaussian mixture.
//!
//! The crate is `no_std` and needs only `alloc`. File formats, the CLI and
//! the parallel drivers live in the companion `mixsem` crate.
//!
//! Two model families are fitted by closed-form coordinate ascent:
//!
//! * [`outcome`]: each outcome `y_ij` is a mixture over `H_j` components,
//!   `y_ij ~ sum_h w_jh N(mu_jh + lambda_j eta_i, psi2_jh)`, with a single
//!   latent factor `eta_i ~ N(x_i' beta, sigma2)`.
//! * [`latent`]: outcomes are Gaussian, `y_ij ~ N(nu_j + lambda_j eta_i, psi2_j)`,
//!   and the factor is a `K`-component mixture of regressions.
//!
//! Missing outcome cells are skipped in every sum, so each update only ever
//! touches observed entries of the [`Dataset`].

#![no_std]
// Float methods come from num_traits; whenever something in the build links
// std (test harness, dev-dependencies) the inherent ones shadow them.
#![allow(unused_imports)]

extern crate alloc;

pub mod criteria;
pub mod data;
pub mod error;
pub mod fit;
pub mod init;
pub mod latent;
pub mod math;
pub mod outcome;
pub mod sim;
pub mod uncertainty;

pub use data::Dataset;
pub use error::{Error, Result};
pub use fit::{FitOptions, FitReport};
pub use latent::{LatentMixtureSpec, LatentQState};
pub use outcome::{OutcomeMixtureSpec, OutcomeQState};
