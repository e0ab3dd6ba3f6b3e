//! Small numeric helpers shared across modules.

/// Pairwise (cascade) summation of `term(i)` for `i` in `0..n`.
///
/// The split points depend only on `n`, so the rounding pattern, and hence
/// the result, is fixed for a given input.
pub fn pairwise_sum(n: usize, term: &mut impl FnMut(usize) -> f64) -> f64 {
    pairwise_range(0, n, term)
}

const BLOCK: usize = 32;

fn pairwise_range(lo: usize, hi: usize, term: &mut impl FnMut(usize) -> f64) -> f64 {
    let len = hi - lo;
    if len <= BLOCK {
        let mut acc = 0.0;
        for i in lo..hi {
            acc += term(i);
        }
        return acc;
    }
    let mid = lo + len / 2;
    pairwise_range(lo, mid, term) + pairwise_range(mid, hi, term)
}

/// Mean and population variance of a slice.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs.len(), &mut |i| xs[i]) / n;
    let var = pairwise_sum(xs.len(), &mut |i| (xs[i] - mean) * (xs[i] - mean)) / n;
    (mean, var)
}
