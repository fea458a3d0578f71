//! Law of a simple random walk on `{0, ..., len}` killed at both ends,
//! conditioned on survival.

use statrs::function::gamma::ln_gamma;

use crate::rng::RngStream;

/// `ln P(S_n = d)` for the simple walk on `Z`, `-inf` off the support.
fn ln_binom_prob(n: u64, d: i64) -> f64 {
    let n_i = n as i64;
    if d.abs() > n_i || (n_i + d) % 2 != 0 {
        return f64::NEG_INFINITY;
    }
    let k = ((n_i + d) / 2) as f64;
    let nf = n as f64;
    ln_gamma(nf + 1.0) - ln_gamma(k + 1.0) - ln_gamma(nf - k + 1.0) - nf * std::f64::consts::LN_2
}

/// `P(S_n = d1) - P(S_n = d1 + 2s)` without cancellation loss for small `s`.
fn image_pair(n: u64, d1: i64, s: i64) -> f64 {
    let n_i = n as i64;
    let d2 = d1 + 2 * s;
    let k1 = (n_i + d1) / 2;
    if !(0..=n_i).contains(&k1) || !(0..=n_i).contains(&(k1 + s)) || s > 512 {
        return ln_binom_prob(n, d1).exp() - ln_binom_prob(n, d2).exp();
    }
    // C(n, k1 + s) / C(n, k1)
    let mut ratio = 1.0;
    for i in 1..=s {
        ratio *= (n_i - k1 - i + 1) as f64 / (k1 + i) as f64;
    }
    ln_binom_prob(n, d1).exp() * (1.0 - ratio)
}

/// Unnormalised weights of `P_start(X_n = p, survive)` for `p` in `1..len`.
///
/// Uses the method of images while `n <= len^2 / 4` and the sine expansion
/// beyond that. Returns `(p, weight)` for the reachable positions.
pub fn killed_weights(len: i64, start: i64, n: u64) -> Vec<(i64, f64)> {
    debug_assert!(len >= 2 && start > 0 && start < len);
    let parity = (start + n as i64).rem_euclid(2);
    let lo = (start - n.min(len as u64) as i64).max(1);
    let hi = (start + n.min(len as u64) as i64).min(len - 1);
    let mut out = Vec::new();
    let lf = len as f64;
    if (n as f64) <= lf * lf / 4.0 {
        let reach = (n as f64).sqrt() * 14.0 + 4.0;
        let period = 2 * len;
        for p in lo..=hi {
            if p.rem_euclid(2) != parity {
                continue;
            }
            let base = p - start;
            let j_lo = ((-reach - base as f64 - 2.0 * start as f64) / period as f64).floor() as i64;
            let j_hi = ((reach - base as f64) / period as f64).ceil() as i64;
            let mut w = 0.0;
            for j in j_lo..=j_hi {
                // P(S_n = p - s + 2Lj) - P(S_n = p + s + 2Lj)
                w += image_pair(n, base + period * j, start);
            }
            out.push((p, w.max(0.0)));
        }
    } else {
        let theta = std::f64::consts::PI / lf;
        let lead = theta.cos().abs().ln() * n as f64;
        let modes: Vec<(f64, f64)> = (1..len)
            .filter_map(|l| {
                let c = (theta * l as f64).cos();
                let lc = c.abs().ln() * n as f64;
                if lc - lead < -60.0 {
                    return None;
                }
                let sign = if c < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };
                Some((l as f64, sign * (lc - lead).exp() * (theta * l as f64 * start as f64).sin()))
            })
            .collect();
        for p in lo..=hi {
            if p.rem_euclid(2) != parity {
                continue;
            }
            let w: f64 = modes.iter().map(|(l, a)| a * (theta * l * p as f64).sin()).sum();
            out.push((p, w.max(0.0)));
        }
    }
    out
}

/// Samples the surviving position after `n` steps from `start` in `(0, len)`.
pub fn sample_killed(len: i64, start: i64, n: u64, rng: &mut RngStream) -> i64 {
    if n == 0 {
        return start;
    }
    let w = killed_weights(len, start, n);
    let total: f64 = w.iter().map(|(_, x)| x).sum();
    let mut u = rng.uniform() * total;
    for (p, x) in &w {
        if u < *x {
            return *p;
        }
        u -= x;
    }
    w.iter().rev().find(|(_, x)| *x > 0.0).map(|(p, _)| *p).unwrap_or(start)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dp(len: i64, start: i64, n: u64) -> Vec<f64> {
        let mut v = vec![0.0; len as usize + 1];
        v[start as usize] = 1.0;
        for _ in 0..n {
            let mut w = vec![0.0; len as usize + 1];
            for p in 1..len as usize {
                if p > 1 {
                    w[p - 1] += 0.5 * v[p];
                }
                if p + 1 < len as usize {
                    w[p + 1] += 0.5 * v[p];
                }
            }
            v = w;
        }
        v
    }

    fn check(len: i64, start: i64, n: u64) {
        let want = dp(len, start, n);
        let total: f64 = want.iter().sum();
        let got = killed_weights(len, start, n);
        let gt: f64 = got.iter().map(|x| x.1).sum();
        for (p, w) in got {
            let e = want[p as usize] / total;
            assert!((w / gt - e).abs() <= 1e-10, "{len} {start} {n} at {p}: {} vs {e}", w / gt);
        }
    }

    #[test]
    fn images_match_dp() {
        for &(len, s, n) in &[(8, 4, 3), (8, 4, 16), (32, 1, 100), (64, 32, 900), (10, 3, 25)] {
            check(len, s, n);
        }
    }

    #[test]
    fn spectral_matches_dp() {
        for &(len, s, n) in &[(8, 4, 17), (8, 1, 200), (32, 1, 400), (20, 10, 101)] {
            check(len, s, n);
        }
    }
}
