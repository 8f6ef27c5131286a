//! Deterministic floating-point reductions.
//!
//! Every large sum in the statistics goes through [`pairwise_sum`], which
//! reduces a slice with a fixed binary tree (sequential base blocks of 32,
//! then recursive halving). The reduction order is a function of the slice
//! alone, so results are bit-identical no matter how many threads produced
//! the inputs, and the accumulated rounding error grows like `O(log n)`
//! rather than `O(n)`.

/// Base block length below which terms are added sequentially.
const BLOCK: usize = 32;

/// Sum a slice with a fixed pairwise reduction tree.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= BLOCK {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        acc
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}
