//! Stateless building blocks: activations, dropout, max-pooling and the
//! classification loss.

use rand::Rng;

use super::Tensor;
use crate::{Error, Result};

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// Inverted-dropout mask: each entry is `0` with probability `p`, else
/// `1/(1-p)`. With `p == 0` the mask is all ones.
pub fn dropout_mask<R: Rng + ?Sized>(rng: &mut R, len: usize, p: f64) -> Vec<f64> {
    if p <= 0.0 {
        return vec![1.0; len];
    }
    let keep = 1.0 / (1.0 - p);
    (0..len)
        .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
        .collect()
}

pub fn apply_mask(x: &mut [f64], mask: &[f64]) {
    for (v, m) in x.iter_mut().zip(mask) {
        *v *= m;
    }
}

/// Elementwise maximum over the time axis of a `[T × d]` matrix. Returns the
/// pooled vector and, per column, the first row that attains the maximum.
pub fn max_pool_time(states: &Tensor) -> Result<(Vec<f64>, Vec<usize>)> {
    if states.shape().len() != 2 || states.rows() == 0 {
        return Err(Error::ShapeMismatch(format!(
            "max_pool_time expects a non-empty [T × d] matrix, got {:?}",
            states.shape()
        )));
    }
    let d = states.cols();
    let mut best = states.row(0).to_vec();
    let mut arg = vec![0usize; d];
    for t in 1..states.rows() {
        for (j, &v) in states.row(t).iter().enumerate() {
            if v > best[j] {
                best[j] = v;
                arg[j] = t;
            }
        }
    }
    Ok((best, arg))
}

/// Scatters a pooled gradient back to the winning rows.
pub fn max_pool_backward(d_pooled: &[f64], argmax: &[usize], rows: usize) -> Tensor {
    let d = d_pooled.len();
    let mut out = Tensor::zeros(&[rows, d]);
    for (j, (&g, &t)) in d_pooled.iter().zip(argmax).enumerate() {
        out.row_mut(t)[j] += g;
    }
    out
}

pub fn log_sum_exp(x: &[f64]) -> f64 {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

pub fn softmax(x: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(x);
    x.iter().map(|v| (v - lse).exp()).collect()
}

/// Softmax cross-entropy of `logits` against class `label`, in log space.
pub fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    log_sum_exp(logits) - logits[label]
}

/// Loss and its gradient with respect to the logits.
pub fn cross_entropy_with_grad(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let lse = log_sum_exp(logits);
    let mut grad: Vec<f64> = logits.iter().map(|v| (v - lse).exp()).collect();
    grad[label] -= 1.0;
    (lse - logits[label], grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cross_entropy_values() {
        assert!((cross_entropy(&[0.0, 0.0], 0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((cross_entropy(&[0.0, 0.0], 1) - std::f64::consts::LN_2).abs() < 1e-15);
        let big = cross_entropy(&[1000.0, 0.0], 0);
        assert!(big.is_finite() && big.abs() < 1e-12);
        // label 1: log(1 + e^{a-b}) at a=1, b=2
        let expected = (1.0 + (1.0f64 - 2.0).exp()).ln();
        assert!((cross_entropy(&[1.0, 2.0], 1) - expected).abs() < 1e-15);
    }

    #[test]
    fn sigmoid_extremes_are_finite() {
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
        assert_eq!(sigmoid(0.0), 0.5);
    }

    #[test]
    fn max_pool_examples() {
        let s = Tensor::from_rows(&[[1.0, 3.0], [2.0, 0.0], [0.0, 5.0]]).unwrap();
        let (p, arg) = max_pool_time(&s).unwrap();
        assert_eq!(p, vec![2.0, 5.0]);
        assert_eq!(arg, vec![1, 2]);
        let one = Tensor::from_rows(&[[4.0, -1.0]]).unwrap();
        assert_eq!(max_pool_time(&one).unwrap().0, vec![4.0, -1.0]);
        assert!(max_pool_time(&Tensor::zeros(&[0, 2])).is_err());
    }

    #[test]
    fn dropout_is_inverted_and_seeded() {
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = ChaCha8Rng::seed_from_u64(9);
        let m1 = dropout_mask(&mut a, 1000, 0.25);
        let m2 = dropout_mask(&mut b, 1000, 0.25);
        assert_eq!(m1, m2);
        assert!(m1.iter().all(|&v| v == 0.0 || (v - 1.0 / 0.75).abs() < 1e-15));
        let mean = m1.iter().sum::<f64>() / 1000.0;
        assert!((mean - 1.0).abs() < 0.1);
        assert!(dropout_mask(&mut a, 5, 0.0).iter().all(|&v| v == 1.0));
    }

    proptest! {
        #[test]
        fn max_pool_is_permutation_invariant(
            rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 3), 1..8),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            let t = Tensor::from_rows(&rows).unwrap();
            let mut shuffled = rows.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let s = Tensor::from_rows(&shuffled).unwrap();
            prop_assert_eq!(max_pool_time(&t).unwrap().0, max_pool_time(&s).unwrap().0);
        }

        #[test]
        fn cross_entropy_finite_and_nonnegative(a in -1e3f64..1e3, b in -1e3f64..1e3, l in 0usize..2) {
            let (loss, g) = cross_entropy_with_grad(&[a, b], l);
            prop_assert!(loss.is_finite() && loss >= 0.0);
            prop_assert!(g.iter().all(|v| v.is_finite()));
            prop_assert!((g[0] + g[1]).abs() < 1e-12);
        }
    }
}
