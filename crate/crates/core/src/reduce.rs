//! Deterministic summation.
//!
//! All integrals go through [`pairwise_sum`], whose association order depends
//! only on the length of the input. Parallel producers write into ordered
//! buffers first, so results are bit-identical across thread counts.

const BLOCK: usize = 16;

/// Pairwise (cascade) summation with a fixed split tree.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= BLOCK {
        let mut acc = 0.0;
        for v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Pairwise sum of `weights[i] * values[i]`.
pub fn pairwise_dot(weights: &[f64], values: &[f64]) -> f64 {
    debug_assert_eq!(weights.len(), values.len());
    let prod: Vec<f64> = weights.iter().zip(values).map(|(w, v)| w * v).collect();
    pairwise_sum(&prod)
}

/// Minimum that propagates NaN instead of hiding it.
pub fn nan_min(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut best = f64::INFINITY;
    for v in values {
        if v.is_nan() {
            return f64::NAN;
        }
        if v < best {
            best = v;
        }
    }
    best
}

pub fn nan_max(values: impl IntoIterator<Item = f64>) -> f64 {
    -nan_min(values.into_iter().map(|v| -v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_exact_integers() {
        let v: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 500500.0);
    }

    #[test]
    fn pairwise_beats_naive_on_small_increments() {
        let mut v = vec![1.0];
        v.extend(std::iter::repeat_n(1e-16, 1 << 16));
        let exact = 1.0 + (1u64 << 16) as f64 * 1e-16;
        let naive: f64 = v.iter().sum();
        assert!((pairwise_sum(&v) - exact).abs() < (naive - exact).abs());
    }

    #[test]
    fn nan_min_propagates() {
        assert!(nan_min([1.0, f64::NAN, 0.0]).is_nan());
        assert_eq!(nan_min([3.0, -1.0, 2.0]), -1.0);
        assert_eq!(nan_max([3.0, -1.0, 2.0]), 3.0);
    }
}
