//! Reductions with a fixed evaluation order.

use num_traits::Float;

/// Below this length the pairwise sum falls back to a left fold.
const PAIRWISE_BLOCK: usize = 8;

/// Pairwise (cascade) summation. The split points depend only on the
/// length, so the result does not depend on how callers chunk work.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= PAIRWISE_BLOCK {
        return values.iter().fold(0.0, |acc, v| acc + v);
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// `log(sum(exp(values)))`, shifted by the maximum. Empty input gives `-inf`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let total = values.iter().fold(0.0, |acc, v| acc + (v - max).exp());
    max + total.ln()
}

/// Replaces `values` with `exp(values) / sum(exp(values))`.
pub fn softmax_in_place(values: &mut [f64]) {
    if values.len() == 1 {
        values[0] = 1.0;
        return;
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in values.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in values.iter_mut() {
        *v /= total;
    }
}
