//! Interval estimates.

use statrs::distribution::{ContinuousCDF, Normal};

/// Two-sided standard normal quantile for confidence `level`.
pub fn z_value(level: f64) -> f64 {
    Normal::standard().inverse_cdf(0.5 + level / 2.0)
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson(k: u64, n: u64, z: f64) -> (f64, f64) {
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    ((center - half).max(0.0).min(p), (center + half).min(1.0).max(p))
}

/// Mean and standard error, summed in the given order.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Sample `q`-quantile with a distribution-free order-statistic interval.
/// Returns `(point, lo, hi)`.
pub fn quantile_ci(xs: &[f64], q: f64, z: f64) -> (f64, f64, f64) {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    let nf = n as f64;
    let idx = |r: f64| (r.max(1.0).min(nf) as usize) - 1;
    let point = s[idx((q * nf).ceil())];
    let spread = z * (nf * q * (1.0 - q)).sqrt();
    let lo = s[idx((nf * q - spread).floor())];
    let hi = s[idx((nf * q + spread).ceil())];
    (point, lo.min(point), hi.max(point))
}
