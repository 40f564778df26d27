//! Numerical building blocks shared by both model families.

pub mod gaussian;
pub mod linalg;
pub mod moments;
pub mod rng;
pub mod sampling;
pub mod special;
pub mod sum;

pub use nalgebra::{DMatrix, DVector};
pub use gaussian::{expected_quadratic_form, g_quadratic, GaussianMoments, NaturalGaussianParams};
pub use moments::{dirichlet_log_expectations, inverse_gamma_moments, InverseGammaMoments};
pub use rng::{derive_seed, substream, SimRng};
pub use special::{digamma, ln_gamma};
pub use sum::{log_sum_exp, pairwise_sum, softmax_in_place};
