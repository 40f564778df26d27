//! Published coverage and mean squared errors for the default simulation
//! design (100 datasets, N = 1000), shown next to study results. No MCMC is
//! run here; these are constants.

/// `(parameter, plain q coverage, bootstrap coverage, MCMC coverage)`.
pub const COVERAGE: [(&str, f64, f64, f64); 18] = [
    ("lambda[2]", 0.36, 0.86, 0.96),
    ("lambda[3]", 0.59, 0.92, 0.97),
    ("lambda[4]", 0.59, 0.83, 0.96),
    ("beta[1]", 0.70, 0.89, 0.94),
    ("beta[2]", 0.61, 0.84, 0.93),
    ("mu[1,1]", 0.44, 0.85, 0.92),
    ("mu[2,1]", 0.46, 0.84, 0.95),
    ("mu[2,2]", 0.60, 0.78, 0.96),
    ("mu[3,1]", 0.50, 0.92, 0.99),
    ("mu[3,2]", 0.84, 0.91, 0.98),
    ("mu[4,1]", 0.58, 0.87, 0.92),
    ("psi2[1,1]", 0.86, 0.89, 0.97),
    ("psi2[2,1]", 0.76, 0.85, 0.94),
    ("psi2[2,2]", 0.89, 0.92, 0.97),
    ("psi2[3,1]", 0.89, 0.86, 0.93),
    ("psi2[3,2]", 0.95, 0.88, 0.96),
    ("psi2[4,1]", 0.95, 0.86, 0.95),
    ("sigma2", 0.74, 0.93, 0.98),
];

/// `(parameter, variational MSE, MCMC MSE)`.
pub const MSE: [(&str, f64, f64); 18] = [
    ("lambda[2]", 0.00033, 0.00034),
    ("lambda[3]", 0.00037, 0.00038),
    ("lambda[4]", 0.00009, 0.00009),
    ("beta[1]", 0.00130, 0.00131),
    ("beta[2]", 0.00293, 0.00297),
    ("mu[1,1]", 0.04802, 0.04865),
    ("mu[2,1]", 0.02825, 0.02799),
    ("mu[2,2]", 0.02854, 0.02843),
    ("mu[3,1]", 0.04056, 0.04001),
    ("mu[3,2]", 0.02911, 0.02848),
    ("mu[4,1]", 0.00736, 0.00739),
    ("psi2[1,1]", 0.05131, 0.05165),
    ("psi2[2,1]", 0.04578, 0.03913),
    ("psi2[2,2]", 0.02406, 0.02354),
    ("psi2[3,1]", 0.12209, 0.12483),
    ("psi2[3,2]", 0.06523, 0.06498),
    ("psi2[4,1]", 0.00240, 0.00241),
    ("sigma2", 0.02879, 0.02897),
];

pub fn coverage(name: &str) -> Option<(f64, f64, f64)> {
    COVERAGE.iter().find(|r| r.0 == name).map(|r| (r.1, r.2, r.3))
}

pub fn mse(name: &str) -> Option<(f64, f64)> {
    MSE.iter().find(|r| r.0 == name).map(|r| (r.1, r.2))
}
