//! Exact answers on finite chains, used to check the simulators.

pub mod chain;
pub mod solve;

use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{arg, Result};
use crate::profile::{neighbors_with_height, HeightCache, Profile, Vertex};

pub use chain::{FiniteChain, KernelIter, Next};
use solve::to_rational;

/// Default cap on explored states.
pub const STATE_CAP: usize = 2_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Float,
    Rational,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Exact {
    Float(f64),
    Rational(BigRational),
}

impl Exact {
    pub fn as_f64(&self) -> f64 {
        match self {
            Exact::Float(v) => *v,
            Exact::Rational(r) => r.to_f64().unwrap_or(f64::NAN),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Exact::Float(v) => json!(v),
            Exact::Rational(r) => json!(r.to_string()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub lower: f64,
    pub upper: f64,
}

impl Bracket {
    pub fn mid(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

/// Machine-readable oracle output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleRecord {
    pub quantity: String,
    pub params: Value,
    pub value: Value,
    pub mode: Mode,
}

impl OracleRecord {
    pub fn exact(quantity: &str, params: Value, v: &Exact) -> Self {
        let mode = if matches!(v, Exact::Rational(_)) { Mode::Rational } else { Mode::Float };
        Self { quantity: quantity.into(), params, value: v.to_json(), mode }
    }

    pub fn bracket(quantity: &str, params: Value, b: Bracket) -> Self {
        Self { quantity: quantity.into(), params, value: json!({"lower": b.lower, "upper": b.upper}), mode: Mode::Float }
    }

    pub fn scalar(quantity: &str, params: Value, v: Value) -> Self {
        Self { quantity: quantity.into(), params, value: v, mode: Mode::Float }
    }
}

/// Walk on `{0, ..., b}` absorbed at both ends.
pub fn path_chain(b: i64) -> Result<FiniteChain<i64>> {
    if b < 2 {
        return arg("path length must be at least 2");
    }
    FiniteChain::explore(1..b, &["low", "high"], STATE_CAP, |&i| {
        let down = if i - 1 == 0 { Next::Absorb(0) } else { Next::To(i - 1) };
        let up = if i + 1 == b { Next::Absorb(1) } else { Next::To(i + 1) };
        vec![(down, 0.5), (up, 0.5)]
    })
}

/// `P_a(hit b before 0)` for the walk on `{0, ..., b}`; equals `a / b`.
pub fn absorption_probability(a: i64, b: i64, mode: Mode) -> Result<Exact> {
    if !(0 < a && a < b) {
        return arg(format!("need 0 < a < b, got a = {a}, b = {b}"));
    }
    let c = path_chain(b)?;
    let i = c.index_of(&a).expect("interior state");
    Ok(match mode {
        Mode::Float => Exact::Float(c.absorption_probabilities("high")?[i]),
        Mode::Rational => Exact::Rational(c.absorption_probabilities_exact("high")?[i].clone()),
    })
}

/// The walk on `V_radius`, killed when it steps to `|x| = radius + 1`.
pub fn comb_chain(profile: &Profile, radius: u64) -> Result<FiniteChain<Vertex>> {
    let roots = profile.enumerate_truncation(radius, STATE_CAP as u64)?;
    let r = radius as i64;
    let mut cache = HeightCache::new(profile);
    FiniteChain::explore(roots, &["exit"], STATE_CAP, |&v| {
        let nb = neighbors_with_height(v, cache.get(v.x));
        let p = 1.0 / nb.len() as f64;
        nb.iter().map(|w| (if w.x.abs() > r { Next::Absorb(0) } else { Next::To(*w) }, p)).collect()
    })
}

/// One marginal step inside a tooth of height `h`: `None` is the spine.
fn tooth_step(z: i64, h: i64) -> Vec<(Option<i64>, f64)> {
    let down = if z - 1 == 0 { None } else { Some(z - 1) };
    if z >= h {
        vec![(down, 1.0)]
    } else {
        vec![(down, 0.5), (Some(z + 1), 0.5)]
    }
}

/// `E(H)`: expected meetings in the upper tooth of height `h`, counted from
/// time 0, before either walker returns to the base, for walkers started at
/// the base and at height `v`.
pub fn expected_tooth_collisions(h: i64, v: i64, mode: Mode) -> Result<Exact> {
    if h < 1 || !(0..=h).contains(&v) {
        return arg(format!("need h >= 1 and 0 <= v <= h, got h = {h}, v = {v}"));
    }
    let chain = FiniteChain::explore(
        (1..=h).flat_map(|a| (1..=h).map(move |b| (a, b))),
        &["return"],
        STATE_CAP,
        |&(a, b)| {
            let mut out = Vec::new();
            for (na, pa) in tooth_step(a, h) {
                for (nb, pb) in tooth_step(b, h) {
                    let next = match (na, nb) {
                        (Some(x), Some(y)) => Next::To((x, y)),
                        _ => Next::Absorb(0),
                    };
                    out.push((next, pa * pb));
                }
            }
            out
        },
    )?;
    let diag: Vec<f64> = chain.states().iter().map(|(a, b)| if a == b { 1.0 } else { 0.0 }).collect();
    // From the base the walker enters the upper tooth with probability 1/4.
    let first_b: Vec<(Option<i64>, f64)> = if v == 0 { vec![(Some(1), 0.25)] } else { tooth_step(v, h) };
    let first: Vec<((i64, i64), f64)> = first_b
        .into_iter()
        .filter_map(|(nb, pb)| nb.map(|b| ((1, b), 0.25 * pb)))
        .collect();
    let t0 = if v == 0 { 1.0 } else { 0.0 };
    Ok(match mode {
        Mode::Float => {
            let g = chain.expected_additive(&diag)?;
            Exact::Float(t0 + first.iter().map(|(s, p)| p * g[chain.index_of(s).unwrap()]).sum::<f64>())
        }
        Mode::Rational => {
            let g = chain.expected_additive_exact(&diag)?;
            let mut acc = to_rational(t0);
            for (s, p) in &first {
                acc += to_rational(*p) * &g[chain.index_of(s).unwrap()];
            }
            Exact::Rational(acc)
        }
    })
}

type Pair = (Vertex, Vertex);

/// Product-chain step of two comb walkers; `classify` sees each successor.
fn pair_successors<F>(cache: &mut HeightCache<'_>, s: &Pair, classify: &mut F) -> Vec<(Next<Pair>, f64)>
where
    F: FnMut(&Pair) -> Option<usize>,
{
    let na = neighbors_with_height(s.0, cache.get(s.0.x));
    let nb = neighbors_with_height(s.1, cache.get(s.1.x));
    let p = 1.0 / (na.len() * nb.len()) as f64;
    let mut out = Vec::with_capacity(na.len() * nb.len());
    for a in na.iter() {
        for b in nb.iter() {
            let t = (*a, *b);
            out.push((classify(&t).map_or(Next::To(t), Next::Absorb), p));
        }
    }
    out
}

/// Bounds on `P(Psi_0)` for walkers from `(u, 0)` and `(u, v)` on the comb
/// truncated at `|x| <= L`. Leaving the truncation counts as failure for
/// the lower bound and as success for the upper bound.
pub fn psi0_probability_bracket(profile: &Profile, u: i64, v: i64, l: u64) -> Result<Bracket> {
    let h = profile.tooth_height(u);
    if !(0..=h).contains(&v) {
        return arg(format!("v = {v} outside [0, {h}]"));
    }
    if u.unsigned_abs() > l {
        return arg(format!("truncation radius {l} excludes column {u}"));
    }
    if v == 0 {
        return Ok(Bracket { lower: 1.0, upper: 1.0 });
    }
    let lim = l as i64;
    let mut classify = |&(a, b): &Pair| {
        if a.x.abs() > lim || b.x.abs() > lim {
            Some(2)
        } else if a.y == 0 || b.y == 0 {
            Some(1)
        } else if a == b && a.y.abs() + b.y.abs() >= v {
            Some(0)
        } else {
            None
        }
    };
    let mut cache = HeightCache::new(profile);
    let start = (Vertex::new(u, 0), Vertex::new(u, v));
    let first = pair_successors(&mut cache, &start, &mut classify);
    let roots: Vec<Pair> = first.iter().filter_map(|(n, _)| if let Next::To(s) = n { Some(*s) } else { None }).collect();
    let chain = FiniteChain::explore(roots, &["success", "failure", "boundary"], STATE_CAP, |s| {
        pair_successors(&mut cache, s, &mut classify)
    })?;
    let ps = chain.absorption_probabilities("success")?;
    let pb = chain.absorption_probabilities("boundary")?;
    let (mut lower, mut boundary) = (0.0, 0.0);
    for (n, p) in &first {
        match n {
            Next::Absorb(0) => lower += p,
            Next::Absorb(2) => boundary += p,
            Next::Absorb(_) => {}
            Next::To(s) => {
                let i = chain.index_of(s).unwrap();
                lower += p * ps[i];
                boundary += p * pb[i];
            }
        }
    }
    Ok(Bracket { lower, upper: (lower + boundary).min(1.0) })
}

/// `P(the walkers meet before either reaches |x| >= radius)`.
///
/// A meeting at the exit time itself does not count.
pub fn collision_before_exit(profile: &Profile, starts: [Vertex; 2], radius: u64) -> Result<f64> {
    let r = radius as i64;
    for s in starts {
        profile.check_vertex(s)?;
    }
    if starts.iter().any(|s| s.x.abs() >= r) {
        return Ok(0.0);
    }
    if starts[0] == starts[1] {
        return Ok(1.0);
    }
    let mut classify = |&(a, b): &Pair| {
        if a.x.abs() >= r || b.x.abs() >= r {
            Some(1)
        } else if a == b {
            Some(0)
        } else {
            None
        }
    };
    let mut cache = HeightCache::new(profile);
    let start = (starts[0], starts[1]);
    let chain = FiniteChain::explore([start], &["meet", "exit"], STATE_CAP, |s| {
        pair_successors(&mut cache, s, &mut classify)
    })?;
    Ok(chain.absorption_probabilities("meet")?[chain.index_of(&start).unwrap()])
}

/// `q_{2n}((x, 0), (x, 0))` for `n = 0..=n_max`, exact on the full comb.
pub fn return_probabilities(profile: &Profile, x: i64, n_max: u64) -> Result<Vec<f64>> {
    // Radius beyond reach in 2 n_max steps, so killing never happens.
    let radius = x.unsigned_abs() + 2 * n_max + 1;
    let chain = comb_chain(profile, radius)?;
    let s = chain.index_of(&Vertex::spine(x)).unwrap();
    let mut it = chain.kernel_iter(s);
    let mut out = vec![1.0];
    for _ in 0..n_max {
        it.advance();
        it.advance();
        out.push(it.dist[s]);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelDecay {
    pub beta: f64,
    pub n: u64,
    pub t: u64,
    /// `max_{|x| <= n, y} q_t((0, 0), (x, y))` on `V_{2n}`.
    pub max_kernel: f64,
    /// `1 / (n^2 log^beta n)`.
    pub bound: f64,
    pub ratio: f64,
}

/// Heat-kernel decay on `LinLog(beta)` at `t = ceil(n^3 log^beta n)`,
/// computed on the walk killed outside `V_{2n}`.
pub fn kernel_decay_check(beta: f64, n: u64) -> Result<KernelDecay> {
    let profile = Profile::linlog(beta)?;
    let lb = (n as f64).ln().powf(beta);
    let t = ((n as f64).powi(3) * lb).ceil();
    if !(t >= 1.0) || n < 2 {
        return arg(format!("step count t = {t} must be positive (n = {n})"));
    }
    let t = t as u64;
    let chain = comb_chain(&profile, 2 * n)?;
    let s = chain.index_of(&Vertex::spine(0)).unwrap();
    let q = chain.killed_kernel(s, t)?;
    let max_kernel = chain
        .states()
        .iter()
        .zip(&q)
        .filter(|(v, _)| v.x.unsigned_abs() <= n)
        .map(|(_, p)| *p)
        .fold(0.0, f64::max);
    let bound = 1.0 / ((n * n) as f64 * lb);
    Ok(KernelDecay { beta, n, t, max_kernel, bound, ratio: max_kernel / bound })
}

impl From<KernelDecay> for OracleRecord {
    fn from(k: KernelDecay) -> Self {
        OracleRecord::scalar(
            "kernel_decay",
            json!({"beta": k.beta, "n": k.n, "t": k.t}),
            json!({"max_kernel": k.max_kernel, "bound": k.bound, "ratio": k.ratio}),
        )
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    #[test]
    fn gambler_ruin_exact() {
        for (a, b) in [(1, 4), (1, 6), (1, 16), (3, 7)] {
            let r = absorption_probability(a, b, Mode::Rational).unwrap();
            assert_eq!(r, Exact::Rational(BigRational::new(BigInt::from(a), BigInt::from(b))));
            let f = absorption_probability(a, b, Mode::Float).unwrap().as_f64();
            assert!((f - a as f64 / b as f64).abs() < 1e-14);
        }
        assert!(absorption_probability(0, 4, Mode::Float).is_err());
    }

    #[test]
    fn tooth_height_one() {
        // h = 1: from (1, 1) both step to 0 at once; one diagonal visit.
        let e = expected_tooth_collisions(1, 0, Mode::Rational).unwrap();
        assert_eq!(e, Exact::Rational(BigRational::new(17.into(), 16.into())));
    }

    #[test]
    fn tooth_float_matches_rational() {
        for (h, v) in [(4, 2), (8, 4), (6, 0)] {
            let f = expected_tooth_collisions(h, v, Mode::Float).unwrap().as_f64();
            let r = expected_tooth_collisions(h, v, Mode::Rational).unwrap().as_f64();
            assert!((f - r).abs() < 1e-13, "{h} {v}: {f} vs {r}");
        }
    }

    #[test]
    fn psi0_trivial_and_bracket_order() {
        let p = Profile::constant(8.0).unwrap();
        assert_eq!(psi0_probability_bracket(&p, 0, 0, 1).unwrap(), Bracket { lower: 1.0, upper: 1.0 });
        let b = psi0_probability_bracket(&p, 0, 4, 2).unwrap();
        assert!(0.0 < b.lower && b.lower <= b.upper && b.upper <= 1.0);
        assert!(psi0_probability_bracket(&p, 5, 4, 2).is_err());
    }

    #[test]
    fn comb_chain_counts() {
        let p = Profile::constant(1.0).unwrap();
        assert_eq!(comb_chain(&p, 100).unwrap().len(), 603);
    }

    #[test]
    fn constant_zero_return_probabilities() {
        // On Z: q_{2n}(0, 0) = C(2n, n) / 4^n.
        let p = Profile::constant(0.0).unwrap();
        let q = return_probabilities(&p, 0, 10).unwrap();
        let mut c = 1.0;
        for (n, qn) in q.iter().enumerate() {
            assert!((qn - c).abs() < 1e-14, "{n}");
            c *= (2 * n + 1) as f64 * (2 * n + 2) as f64 / ((n + 1) * (n + 1)) as f64 / 4.0;
        }
    }

    #[test]
    fn killed_kernel_mass_and_green_identity() {
        let p = Profile::constant(2.0).unwrap();
        let c = comb_chain(&p, 3).unwrap();
        let s = c.index_of(&Vertex::spine(0)).unwrap();
        let q = c.killed_kernel(s, 50).unwrap();
        let mass: f64 = q.iter().sum();
        assert!(mass > 0.0 && mass < 1.0);
        assert!(c.green_residual(&[0, 5, s]).unwrap() < 1e-10);
        let g = c.green_function(s).unwrap();
        assert!(g[s] >= 1.0);
    }

    #[test]
    fn kernel_decay_rejects_degenerate() {
        assert!(kernel_decay_check(3.0, 1).is_err());
        let k = kernel_decay_check(3.0, 2).unwrap();
        assert!(k.t >= 1 && k.ratio.is_finite());
    }

    #[test]
    fn meeting_before_exit_symmetric() {
        let p = Profile::constant(1.0).unwrap();
        let a = collision_before_exit(&p, [Vertex::spine(-1), Vertex::spine(1)], 3).unwrap();
        let b = collision_before_exit(&p, [Vertex::spine(1), Vertex::spine(-1)], 3).unwrap();
        assert!((a - b).abs() < 1e-13 && a > 0.0 && a < 1.0);
    }
}
