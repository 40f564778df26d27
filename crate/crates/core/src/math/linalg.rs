//! Small dense helpers on top of nalgebra.
//!
//! Model state stores matrices as nested row vectors so that the serialized
//! form is plain JSON; these functions convert at the boundary.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{bail, Result};

/// `m += w x x'` and `v += c x`, in place.
pub fn accumulate_outer(m: &mut DMatrix<f64>, v: &mut DVector<f64>, x: &[f64], w: f64, c: f64) {
    let p = x.len();
    for col in 0..p {
        let wx = w * x[col];
        for row in 0..p {
            m[(row, col)] += wx * x[row];
        }
        v[col] += c * x[col];
    }
}

/// Builds a matrix from nested rows. Rows must all have the same length.
pub fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        bail!(Dimension, "ragged matrix rows");
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

/// Nested-row view of a matrix.
pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

/// Averages a matrix with its transpose.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
pub fn spd_inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    if m.nrows() != m.ncols() {
        bail!(Dimension, "{what}: expected a square matrix, got {}x{}", m.nrows(), m.ncols());
    }
    if m.nrows() == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    match m.clone().cholesky() {
        Some(c) => {
            let mut inv = c.inverse();
            symmetrize(&mut inv);
            Ok(inv)
        }
        None => bail!(Singular, "{what} is not positive definite"),
    }
}

/// Returns true when Cholesky succeeds.
pub fn is_spd(m: &DMatrix<f64>) -> bool {
    m.nrows() == m.ncols() && (m.nrows() == 0 || m.clone().cholesky().is_some())
}

/// `x' A x` for a symmetric `A` stored as a dense matrix.
pub fn quad_form(a: &DMatrix<f64>, x: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..x.len() {
        let mut row = 0.0;
        for j in 0..x.len() {
            row += a[(i, j)] * x[j];
        }
        total += x[i] * row;
    }
    total
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
