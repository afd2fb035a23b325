//! Small statistical helpers shared by the simulator and the growth-index
//! estimators: bit-stable summation, moment estimates, log-log regression
//! and a golden-section maximizer.

use alloc::vec::Vec;

use crate::math;

/// Sum in a fixed binary-tree order.
///
/// Deterministic for a fixed input length regardless of how the values were
/// produced, and with O(log n) error growth instead of O(n).
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 32 {
        let mut acc = 0.0;
        for v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Sample mean and standard error of the mean.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    assert!(n >= 2, "need at least two samples");
    let nf = n as f64;
    let mean = pairwise_sum(values) / nf;
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&sq) / (nf - 1.0);
    (mean, math::sqrt(var / nf))
}

/// Ordinary least squares fit of `y = slope * x + intercept`.
///
/// Returns `(slope, intercept, residual_rms)`.
pub fn ols_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2);
    let n = xs.len() as f64;
    let mx = pairwise_sum(xs) / n;
    let my = pairwise_sum(ys) / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut ss_res = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let r = y - (slope * x + intercept);
        ss_res += r * r;
    }
    (slope, intercept, math::sqrt(ss_res / n))
}

/// Golden-section search for the maximum of a unimodal function on `[a, b]`.
///
/// Returns `(argmax, max)`.  If `f` is not unimodal the result is a local
/// maximum; callers that need a guarantee should verify against a scan.
pub fn golden_section_max<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    let xm = 0.5 * (lo + hi);
    (xm, f(xm))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_smooth_data() {
        let xs: Vec<f64> = (0..10_000).map(|i| (i as f64).sin()).collect();
        let naive: f64 = xs.iter().sum();
        assert!((pairwise_sum(&xs) - naive).abs() < 1e-9);
    }

    #[test]
    fn mean_stderr_known_values() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let (m, se) = mean_and_stderr(&xs);
        assert!((m - 2.5).abs() < 1e-15);
        // sample std = sqrt(5/3), stderr = sqrt(5/3)/2
        assert!((se - (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn ols_recovers_exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        let (s, i, r) = ols_fit(&xs, &ys);
        assert!((s - 2.0).abs() < 1e-14);
        assert!((i - 1.0).abs() < 1e-14);
        assert!(r < 1e-14);
    }

    #[test]
    fn golden_section_finds_peak() {
        let (x, v) = golden_section_max(|x| -(x - 0.7) * (x - 0.7), 0.0, 2.0, 1e-10);
        assert!((x - 0.7).abs() < 1e-8);
        assert!(v.abs() < 1e-15);
    }
}
