//! Precomputed first-passage laws used by the event-driven engine.

use std::sync::OnceLock;

/// Mass left when a first-passage table is cut off.
const TAIL: f64 = 1e-17;

/// Tuning knobs for the event-driven engine. Every setting gives the same
/// law; they only trade table size against event count.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FastConfig {
    /// Teeth up to this height get a full excursion table.
    pub h_small: i64,
    /// Largest elapsed time covered by the universal excursion table
    /// (power of two).
    pub k0_max: u64,
    /// Largest block half-width (power of two, at least 2).
    pub m_max: i64,
}

impl Default for FastConfig {
    fn default() -> Self {
        Self { h_small: 16, k0_max: 4096, m_max: 512 }
    }
}

/// Discrete law on increasing times, truncated at `TAIL`.
#[derive(Clone, Debug)]
pub struct PassageLaw {
    pub times: Vec<u64>,
    pub cdf: Vec<f64>,
    /// `guide[k]` is the first index with `cdf > k / G`.
    guide: Vec<u32>,
}

/// Outcome of sampling a [`PassageLaw`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Draw {
    At(u64),
    /// Still running at this time.
    Beyond(u64),
}

impl PassageLaw {
    pub fn new(times: Vec<u64>, cdf: Vec<f64>) -> Self {
        let g = cdf.len().clamp(1, 1 << 12);
        let guide = (0..=g).map(|k| cdf.partition_point(|&c| c <= k as f64 / g as f64) as u32).collect();
        Self { times, cdf, guide }
    }

    /// Inverse-CDF draw: the first index with `cdf > u`.
    pub fn sample(&self, u: f64) -> Draw {
        let g = self.guide.len() - 1;
        // One bucket of slack on each side absorbs rounding in `u * g`.
        let k = ((u * g as f64) as usize).min(g - 1);
        let (lo, hi) = (self.guide[k.saturating_sub(1)] as usize, self.guide[(k + 2).min(g)] as usize);
        let i = lo + self.cdf[lo..hi].partition_point(|&c| c <= u);
        match self.times.get(i) {
            Some(&t) => Draw::At(t),
            None => Draw::Beyond(*self.times.last().unwrap_or(&0)),
        }
    }

    pub fn mass_upto(&self, t: u64) -> f64 {
        let i = self.times.partition_point(|&s| s <= t);
        if i == 0 {
            0.0
        } else {
            self.cdf[i - 1]
        }
    }
}

/// Exit time of `{0, ..., 2m}` from `m`.
fn block_law(m: i64) -> PassageLaw {
    let len = (2 * m) as usize;
    let mut v = vec![0.0; len + 1];
    let mut w = v.clone();
    v[m as usize] = 1.0;
    let (mut times, mut cdf) = (Vec::new(), Vec::new());
    let mut acc = 0.0;
    let mut t = 0u64;
    loop {
        t += 1;
        w.fill(0.0);
        let absorbed = 0.5 * (v[1] + v[len - 1]);
        for p in 1..len {
            let x = 0.5 * v[p];
            if x == 0.0 {
                continue;
            }
            if p > 1 {
                w[p - 1] += x;
            }
            if p + 1 < len {
                w[p + 1] += x;
            }
        }
        std::mem::swap(&mut v, &mut w);
        if absorbed > 0.0 {
            acc += absorbed;
            times.push(t);
            cdf.push(acc);
            let alive: f64 = v.iter().sum();
            if alive < TAIL {
                break;
            }
        }
    }
    PassageLaw::new(times, cdf)
}

/// Half-widths from which block laws come from the sine expansion.
const SPECTRAL_FROM: i64 = 256;

/// Survival left when a spectral block table is cut off; the engine
/// resolves the rest from the killed law.
const SPECTRAL_TAIL: f64 = 1e-3;

/// Exit time of `{0, ..., 2m}` from `m` via
/// `P(T > t) = (1/m) sum_{l odd} (-1)^((l-1)/2) cot(pi l / 4m) cos(pi l / 2m)^t`,
/// evaluated on `t = m, m + 2, ...` until the survival drops below `tail`.
fn block_law_spectral(m: i64, tail: f64) -> PassageLaw {
    let len = 2 * m;
    let pi = std::f64::consts::PI;
    let mut modes: Vec<(f64, f64, f64)> = (1..len)
        .step_by(2)
        .map(|l| {
            let sign = if (l - 1) / 2 % 2 == 0 { 1.0 } else { -1.0 };
            let c = (pi * l as f64 / len as f64).cos();
            (sign / (pi * l as f64 / (2 * len) as f64).tan() / m as f64, c * c, c.powi(m as i32))
        })
        .collect();
    let (mut times, mut cdf) = (Vec::new(), Vec::new());
    let mut t = m as u64;
    loop {
        let survival: f64 = modes.iter().map(|(a, _, p)| a * p).sum();
        let acc = (1.0 - survival).clamp(cdf.last().copied().unwrap_or(0.0), 1.0);
        times.push(t);
        cdf.push(acc);
        if survival < tail {
            break;
        }
        for md in modes.iter_mut() {
            md.2 *= md.1;
        }
        modes.retain(|(a, _, p)| (a * p).abs() > 1e-22);
        t += 2;
    }
    PassageLaw::new(times, cdf)
}

fn block_table(m: i64) -> PassageLaw {
    if m >= SPECTRAL_FROM {
        block_law_spectral(m, SPECTRAL_TAIL)
    } else {
        block_law(m)
    }
}

/// Duration of a tooth excursion of height `h`: one step up, then the walk
/// reflected at `h` until it returns to the spine.
fn excursion_law(h: i64) -> PassageLaw {
    let h = h as usize;
    let mut v = vec![0.0; h + 1];
    let mut w = v.clone();
    v[1] = 1.0;
    let (mut times, mut cdf) = (Vec::new(), Vec::new());
    let mut acc = 0.0;
    let mut t = 1u64;
    loop {
        t += 1;
        w.fill(0.0);
        let absorbed = if h == 1 { v[1] } else { 0.5 * v[1] };
        for z in 1..=h {
            if v[z] == 0.0 {
                continue;
            }
            if z == h {
                if z > 1 {
                    w[z - 1] += v[z];
                }
            } else {
                if z > 1 {
                    w[z - 1] += 0.5 * v[z];
                }
                w[z + 1] += 0.5 * v[z];
            }
        }
        std::mem::swap(&mut v, &mut w);
        if absorbed > 0.0 {
            acc += absorbed;
            times.push(t);
            cdf.push(acc);
            let alive: f64 = v.iter().sum();
            if alive < TAIL {
                break;
            }
        }
    }
    PassageLaw::new(times, cdf)
}

/// Excursion duration when the tooth is too tall to matter, for durations
/// up to `k_max`: `P(E = 2j) = C_{j-1} / 2^{2j-1}`.
fn halfline_law(k_max: u64) -> PassageLaw {
    let (mut times, mut cdf) = (Vec::new(), Vec::new());
    let mut f = 0.5;
    let mut acc = 0.0;
    let mut j = 1u64;
    while 2 * j <= k_max {
        acc += f;
        times.push(2 * j);
        cdf.push(acc);
        f *= (2 * j - 1) as f64 / (2 * (j + 1)) as f64;
        j += 1;
    }
    PassageLaw::new(times, cdf)
}

/// Height at elapsed time `k` of an excursion that has not yet returned,
/// ignoring the tip. Cumulative weights over heights `1..=k`.
fn meander_cdf(k: u64) -> Vec<f64> {
    let k = k as usize;
    let mut v = vec![0.0; k + 2];
    let mut w = v.clone();
    v[1] = 1.0;
    for _ in 1..k {
        w.fill(0.0);
        for z in 1..=k {
            if v[z] == 0.0 {
                continue;
            }
            if z > 1 {
                w[z - 1] += 0.5 * v[z];
            }
            w[z + 1] += 0.5 * v[z];
        }
        std::mem::swap(&mut v, &mut w);
    }
    let total: f64 = v.iter().sum();
    let mut acc = 0.0;
    v[1..=k]
        .iter()
        .map(|x| {
            acc += x / total;
            acc
        })
        .collect()
}

pub struct FastTables {
    pub cfg: FastConfig,
    /// `blocks[j]` is the exit law of half-width `2^(j+1)`.
    blocks: Vec<PassageLaw>,
    /// `small[h - 1]` for `h = 1..=h_small`.
    small: Vec<PassageLaw>,
    halfline: PassageLaw,
    /// `meander[j]` is the height law at elapsed `2^j`.
    meander: Vec<Vec<f64>>,
}

impl FastTables {
    pub fn new(cfg: FastConfig) -> Self {
        assert!(cfg.h_small >= 2, "h_small must be at least 2");
        assert!(cfg.m_max >= 2 && (cfg.m_max as u64).is_power_of_two(), "m_max must be a power of two >= 2");
        assert!(cfg.k0_max >= 2 && cfg.k0_max.is_power_of_two(), "k0_max must be a power of two >= 2");
        let mut blocks = Vec::new();
        let mut m = 2;
        while m <= cfg.m_max {
            blocks.push(block_table(m));
            m *= 2;
        }
        let small = (1..=cfg.h_small).map(excursion_law).collect();
        let mut meander = Vec::new();
        let mut k = 1;
        while k <= cfg.k0_max {
            meander.push(meander_cdf(k));
            k *= 2;
        }
        Self { cfg, blocks, small, halfline: halfline_law(cfg.k0_max), meander }
    }

    /// Shared tables for the default configuration.
    pub fn standard() -> &'static FastTables {
        static T: OnceLock<FastTables> = OnceLock::new();
        T.get_or_init(|| FastTables::new(FastConfig::default()))
    }

    pub fn block(&self, m: i64) -> &PassageLaw {
        &self.blocks[m.trailing_zeros() as usize - 1]
    }

    pub fn small(&self, h: i64) -> &PassageLaw {
        &self.small[h as usize - 1]
    }

    pub fn halfline(&self) -> &PassageLaw {
        &self.halfline
    }

    /// Cut-off elapsed time for the universal table in a tooth of height `h`.
    ///
    /// Up to elapsed `h - 1` the tip cannot have been reached.
    pub fn k0(&self, h: i64) -> u64 {
        let lim = (h - 1).max(1) as u64;
        let p = 1u64 << (63 - lim.leading_zeros());
        p.min(self.cfg.k0_max)
    }

    pub fn meander(&self, k: u64) -> &[f64] {
        &self.meander[k.trailing_zeros() as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn guided_sampling_matches_bisection() {
        let t = FastTables::standard();
        let b = block_law(2);
        for law in [&b, t.block(64), t.halfline(), t.small(5)] {
            let mut rng = crate::rng::RngStream::new(3);
            let grid = (0..=20_000).map(|i| i as f64 / 20_000.0 * (1.0 - 1e-16));
            for u in grid.chain((0..20_000).map(|_| rng.uniform())) {
                let j = law.cdf.partition_point(|&c| c <= u);
                let plain = law.times.get(j).map_or(Draw::Beyond(*law.times.last().unwrap()), |&t| Draw::At(t));
                assert_eq!(law.sample(u), plain, "u = {u}");
            }
        }
    }

    #[test]
    fn spectral_block_matches_recursion() {
        for m in [4i64, 16, 64, 128] {
            let exact = block_law(m);
            let spec = block_law_spectral(m, 1e-12);
            assert_eq!(exact.times[..spec.times.len()], spec.times[..]);
            for (a, b) in exact.cdf.iter().zip(&spec.cdf) {
                assert!((a - b).abs() < 1e-12, "m = {m}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn block_two() {
        // From 2 in {0..4}: exit at time 2 w.p. 1/2, then geometric.
        let b = block_law(2);
        assert_eq!(b.times[..3], [2, 4, 6]);
        assert!((b.cdf[0] - 0.5).abs() < 1e-15);
        assert!((b.cdf[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn block_mean_is_m_squared() {
        for m in [2i64, 4, 8, 16] {
            let b = block_law(m);
            let mut prev = 0.0;
            let mean: f64 = b
                .times
                .iter()
                .zip(&b.cdf)
                .map(|(t, c)| {
                    let p = c - prev;
                    prev = *c;
                    *t as f64 * p
                })
                .sum();
            assert!((mean - (m * m) as f64).abs() < 1e-6 * (m * m) as f64, "{m}: {mean}");
        }
    }

    #[test]
    fn excursion_means() {
        // Expected return time to the base of the path {0..h}: 2h steps.
        for h in 1..=12 {
            let e = excursion_law(h);
            let mut prev = 0.0;
            let mean: f64 = e
                .times
                .iter()
                .zip(&e.cdf)
                .map(|(t, c)| {
                    let p = c - prev;
                    prev = *c;
                    *t as f64 * p
                })
                .sum();
            assert!((mean - 2.0 * h as f64).abs() < 1e-9, "{h}: {mean}");
        }
    }

    #[test]
    fn halfline_agrees_with_tall_tooth() {
        let hl = halfline_law(64);
        let tall = excursion_law(40);
        for (t, c) in hl.times.iter().zip(&hl.cdf) {
            if *t <= 39 {
                assert!((tall.mass_upto(*t) - c).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn k0_power_of_two_below_height() {
        let t = FastTables::new(FastConfig { h_small: 2, k0_max: 8, m_max: 2 });
        assert_eq!(t.k0(3), 2);
        assert_eq!(t.k0(9), 8);
        assert_eq!(t.k0(8), 4);
        assert_eq!(t.k0(1000), 8);
    }

    #[test]
    fn sampling_tail() {
        let b = block_law(2);
        assert_eq!(b.sample(0.0), Draw::At(2));
        assert!(matches!(b.sample(1.0), Draw::Beyond(_)));
    }
}
