//! Fixed-order reductions shared by every statistic in the crate.
//!
//! Sums are computed by pairwise (cascade) summation over the input order, so
//! results do not depend on how work was split across threads.

use nalgebra::Vector3;

const PAIRWISE_BLOCK: usize = 32;

pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= PAIRWISE_BLOCK {
        let mut acc = 0.0;
        for v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub fn pairwise_sum_vec3(values: &[Vector3<f64>]) -> Vector3<f64> {
    if values.len() <= PAIRWISE_BLOCK {
        let mut acc = Vector3::zeros();
        for v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum_vec3(&values[..mid]) + pairwise_sum_vec3(&values[mid..])
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(pairwise_sum(values) / values.len() as f64)
    }
}

/// Median with the midpoint convention for even lengths. NaNs sort last.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    Some(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    })
}
