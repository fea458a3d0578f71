//! Tooth-height profiles, comb geometry and the collision classification.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::rng::derive_seed;

/// Heights are clamped here so that `2h + 1` and friends never overflow.
pub const MAX_HEIGHT: i64 = 1 << 60;

/// A vertex of the comb. `y == 0` is the spine.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Vertex {
    pub x: i64,
    pub y: i64,
}

impl Vertex {
    pub const fn new(x: i64, y: i64) -> Self {
        Self { x, y }
    }

    pub const fn spine(x: i64) -> Self {
        Self { x, y: 0 }
    }

    /// `(x + y) mod 2`, which flips on every step.
    pub fn parity(self) -> u8 {
        (self.x.wrapping_add(self.y)).rem_euclid(2) as u8
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Law of the i.i.d. heights.
#[derive(Clone, Debug, PartialEq)]
pub enum HeightLaw {
    /// `P(k) = p (1 - p)^k` on `{0, 1, ...}`.
    Geometric { p: f64 },
    Poisson { lambda: f64 },
    /// Weight `w[k]` on height `k`.
    Empirical { weights: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    Constant(f64),
    /// `|n|^alpha`
    Power(f64),
    /// `|n| log^beta(|n| v 1)`
    LinLog(f64),
    /// Same as `LinLog(1)`.
    NLogN,
    /// Finite table, zero elsewhere.
    Table(BTreeMap<i64, f64>),
    Iid { law: HeightLaw, seed: u64 },
}

/// A validated, immutable profile `f: Z -> [0, inf)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Profile {
    family: Family,
    cdf: Vec<f64>,
}

fn finite_nonneg(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        arg(format!("{name} must be finite and >= 0, got {v}"))
    }
}

impl Profile {
    pub fn new(family: Family) -> Result<Self> {
        let mut cdf = Vec::new();
        match &family {
            Family::Constant(a) => {
                finite_nonneg("a", *a)?;
            }
            Family::Power(alpha) => {
                if !(alpha.is_finite() && *alpha > 0.0) {
                    return arg(format!("alpha must be finite and > 0, got {alpha}"));
                }
            }
            Family::LinLog(beta) => {
                finite_nonneg("beta", *beta)?;
            }
            Family::NLogN => {}
            Family::Table(t) => {
                for v in t.values() {
                    finite_nonneg("table value", *v)?;
                }
            }
            Family::Iid { law, .. } => match law {
                HeightLaw::Geometric { p } => {
                    if !(*p > 0.0 && *p <= 1.0) {
                        return arg(format!("geometric p must lie in (0, 1], got {p}"));
                    }
                }
                HeightLaw::Poisson { lambda } => {
                    if !(lambda.is_finite() && *lambda >= 0.0 && *lambda <= 700.0) {
                        return arg(format!("poisson lambda must lie in [0, 700], got {lambda}"));
                    }
                }
                HeightLaw::Empirical { weights } => {
                    let mut acc = 0.0;
                    for w in weights {
                        acc += finite_nonneg("weight", *w)?;
                        cdf.push(acc);
                    }
                    if acc <= 0.0 {
                        return arg("empirical weights must have positive total");
                    }
                    for c in &mut cdf {
                        *c /= acc;
                    }
                }
            },
        }
        Ok(Self { family, cdf })
    }

    pub fn constant(a: f64) -> Result<Self> {
        Self::new(Family::Constant(a))
    }

    pub fn power(alpha: f64) -> Result<Self> {
        Self::new(Family::Power(alpha))
    }

    pub fn linlog(beta: f64) -> Result<Self> {
        Self::new(Family::LinLog(beta))
    }

    pub fn nlogn() -> Self {
        Self { family: Family::NLogN, cdf: Vec::new() }
    }

    pub fn table(entries: impl IntoIterator<Item = (i64, f64)>) -> Result<Self> {
        Self::new(Family::Table(entries.into_iter().collect()))
    }

    pub fn iid(law: HeightLaw, seed: u64) -> Result<Self> {
        Self::new(Family::Iid { law, seed })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// True when `f(x)` depends on `|x|` only and is nondecreasing in `|x|`.
    pub fn is_radial(&self) -> bool {
        matches!(
            self.family,
            Family::Constant(_) | Family::Power(_) | Family::LinLog(_) | Family::NLogN
        )
    }

    /// Real value `f(x)`.
    pub fn value(&self, x: i64) -> f64 {
        let n = x.unsigned_abs() as f64;
        match &self.family {
            Family::Constant(a) => *a,
            Family::Power(alpha) => {
                if alpha.fract() == 0.0 && *alpha <= 64.0 {
                    n.powi(*alpha as i32)
                } else {
                    n.powf(*alpha)
                }
            }
            Family::LinLog(beta) => n * n.max(1.0).ln().powf(*beta),
            Family::NLogN => n * n.max(1.0).ln(),
            Family::Table(t) => t.get(&x).copied().unwrap_or(0.0),
            Family::Iid { law, seed } => self.iid_height(law, *seed, x) as f64,
        }
    }

    fn iid_height(&self, law: &HeightLaw, seed: u64, x: i64) -> i64 {
        // Stateless: the height at x depends only on (seed, x).
        let u = ((derive_seed(seed, x as u64) >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
        match law {
            HeightLaw::Geometric { p } => {
                if *p >= 1.0 {
                    0
                } else {
                    let k = (u.ln() / (1.0 - p).ln()).floor();
                    (k as i64).min(MAX_HEIGHT)
                }
            }
            HeightLaw::Poisson { lambda } => {
                let mut k = 0i64;
                let mut pmf = (-lambda).exp();
                let mut cdf = pmf;
                let cap = (lambda + 60.0 * lambda.sqrt() + 100.0) as i64;
                while u > cdf && k < cap {
                    k += 1;
                    pmf *= lambda / k as f64;
                    cdf += pmf;
                }
                k
            }
            HeightLaw::Empirical { .. } => {
                let i = self.cdf.partition_point(|&c| c < u);
                i.min(self.cdf.len() - 1) as i64
            }
        }
    }

    /// `floor(f(x))`, clamped to [`MAX_HEIGHT`].
    pub fn tooth_height(&self, x: i64) -> i64 {
        if let Family::Iid { law, seed } = &self.family {
            return self.iid_height(law, *seed, x);
        }
        let v = self.value(x);
        // A few ulps of slack absorb libm rounding on exact integers.
        let h = (v * (1.0 + 4.0 * f64::EPSILON)).floor();
        if h >= MAX_HEIGHT as f64 {
            MAX_HEIGHT
        } else {
            h as i64
        }
    }

    /// Checks `v` belongs to the comb.
    pub fn check_vertex(&self, v: Vertex) -> Result<i64> {
        let h = self.tooth_height(v.x);
        if v.y.unsigned_abs() > h as u64 {
            Err(Error::InvalidVertex { vertex: v, height: h })
        } else {
            Ok(h)
        }
    }

    /// `1 v max_{|i| <= n} f(i)`.
    pub fn breve_f(&self, n: u64) -> f64 {
        let n = n.min(i64::MAX as u64) as i64;
        let m = if self.is_radial() {
            self.value(n)
        } else if let Family::Table(t) = &self.family {
            t.range(-n..=n).map(|(_, v)| *v).fold(0.0, f64::max)
        } else {
            (-n..=n).map(|i| self.value(i)).fold(0.0, f64::max)
        };
        m.max(1.0)
    }

    /// `sum_{n=1}^{N} 1 / breve_f(n)`, computed with a running maximum.
    pub fn reciprocal_partial_sum(&self, big_n: u64) -> f64 {
        let mut running = self.value(0).max(1.0);
        let mut sum = 0.0;
        for n in 1..=big_n {
            let i = n as i64;
            let v = if self.is_radial() {
                self.value(i)
            } else {
                self.value(i).max(self.value(-i))
            };
            running = running.max(v);
            sum += 1.0 / running;
        }
        sum
    }

    /// Vertices of `V_n = {(x, y): |x| <= n, |y| <= h(x)}` in `(x, y)` order.
    pub fn enumerate_truncation(&self, n: u64, cap: u64) -> Result<Vec<Vertex>> {
        let n = i64::try_from(n).map_err(|_| Error::Argument("truncation radius too large".into()))?;
        let mut count: u64 = 0;
        for x in -n..=n {
            let h = self.tooth_height(x) as u64;
            count = count
                .checked_add(2 * h + 1)
                .filter(|c| *c <= cap)
                .ok_or_else(|| Error::Resource(format!("truncation V_{n} exceeds {cap} vertices")))?;
        }
        let mut out = Vec::with_capacity(count as usize);
        for x in -n..=n {
            let h = self.tooth_height(x);
            out.extend((-h..=h).map(|y| Vertex::new(x, y)));
        }
        Ok(out)
    }

    /// Symbolic classification of the collision behaviour.
    pub fn classify(&self) -> Classification {
        use Verdict::*;
        let (verdicts, witness) = match &self.family {
            Family::Constant(a) => (
                vec![InfiniteCollision, TripleCollision],
                format!("bounded teeth (f = {a}); constant profiles also have i.i.d. heights"),
            ),
            Family::Power(alpha) if *alpha <= 1.0 => {
                (vec![InfiniteCollision], format!("f(n) = n^{alpha} = O(n log n)"))
            }
            Family::Power(alpha) => (
                vec![Unknown],
                format!(
                    "f(n) = n^{alpha} grows faster than n log^2 n; conjectured finite collision \
                     (sum 1/breve_f converges)"
                ),
            ),
            Family::NLogN => (vec![InfiniteCollision], "f(n) = n log n".to_string()),
            Family::LinLog(beta) if *beta <= 1.0 => {
                (vec![InfiniteCollision], format!("f(n) = n log^{beta} n = O(n log n)"))
            }
            Family::LinLog(beta) if *beta > 2.0 => (
                vec![FiniteCollision],
                format!("f(n) = n log^{beta} n with beta > 2: finitely many collisions a.s."),
            ),
            Family::LinLog(beta) => (
                vec![Unknown],
                format!(
                    "f(n) = n log^{beta} n with 1 < beta <= 2: open; conjectured finite collision \
                     (sum 1/breve_f converges)"
                ),
            ),
            Family::Table(t) => (
                vec![InfiniteCollision],
                format!("finite support ({} entries): teeth are bounded", t.len()),
            ),
            Family::Iid { .. } => (
                vec![TripleCollision, InfiniteCollision],
                "i.i.d. heights with finite mean; triple collisions imply pair collisions".to_string(),
            ),
        };
        Classification { verdicts, witness }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    /// Two walkers collide infinitely often a.s.
    InfiniteCollision,
    /// Two walkers collide finitely often a.s.
    FiniteCollision,
    /// Three walkers collide simultaneously infinitely often a.s.
    TripleCollision,
    Unknown,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::InfiniteCollision => "InfiniteCollision",
            Verdict::FiniteCollision => "FiniteCollision",
            Verdict::TripleCollision => "TripleCollision",
            Verdict::Unknown => "Unknown",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    /// Every verdict that applies; the first is the primary one.
    pub verdicts: Vec<Verdict>,
    pub witness: String,
}

impl Classification {
    pub fn primary(&self) -> Verdict {
        self.verdicts[0]
    }

    pub fn contains(&self, v: Verdict) -> bool {
        self.verdicts.contains(&v)
    }
}

/// Up to four neighbours, stored inline.
#[derive(Clone, Copy, Debug)]
pub struct Neighbors {
    buf: [Vertex; 4],
    len: u8,
}

impl Neighbors {
    fn push(&mut self, v: Vertex) {
        self.buf[self.len as usize] = v;
        self.len += 1;
    }

    pub fn as_slice(&self) -> &[Vertex] {
        &self.buf[..self.len as usize]
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

impl std::ops::Deref for Neighbors {
    type Target = [Vertex];
    fn deref(&self) -> &[Vertex] {
        self.as_slice()
    }
}

/// Neighbours of `v` given the tooth height `h` of its column.
///
/// Order: spine `[left, right, up, down]`; tooth `[toward spine, away]`.
pub fn neighbors_with_height(v: Vertex, h: i64) -> Neighbors {
    let mut out = Neighbors { buf: [v; 4], len: 0 };
    if v.y == 0 {
        out.push(Vertex::new(v.x - 1, 0));
        out.push(Vertex::new(v.x + 1, 0));
        if h >= 1 {
            out.push(Vertex::new(v.x, 1));
            out.push(Vertex::new(v.x, -1));
        }
    } else {
        let s = v.y.signum();
        out.push(Vertex::new(v.x, v.y - s));
        if v.y.abs() < h {
            out.push(Vertex::new(v.x, v.y + s));
        }
    }
    out
}

/// Neighbours of `v` in `Comb(Z, f)`.
pub fn neighbors(profile: &Profile, v: Vertex) -> Result<Neighbors> {
    let h = profile.check_vertex(v)?;
    Ok(neighbors_with_height(v, h))
}

/// Memoised tooth heights for a walk that stays near the origin.
#[derive(Debug)]
pub struct HeightCache<'a> {
    profile: &'a Profile,
    pos: Vec<i64>,
    neg: Vec<i64>,
}

impl<'a> HeightCache<'a> {
    pub fn new(profile: &'a Profile) -> Self {
        Self { profile, pos: Vec::new(), neg: Vec::new() }
    }

    pub fn profile(&self) -> &'a Profile {
        self.profile
    }

    #[inline]
    pub fn get(&mut self, x: i64) -> i64 {
        if x >= 0 {
            let i = x as usize;
            while self.pos.len() <= i {
                let k = self.pos.len() as i64;
                self.pos.push(self.profile.tooth_height(k));
            }
            self.pos[i]
        } else {
            let i = (-(x + 1)) as usize;
            while self.neg.len() <= i {
                let k = -(self.neg.len() as i64) - 1;
                self.neg.push(self.profile.tooth_height(k));
            }
            self.neg[i]
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileSpec {
    family: String,
    #[serde(default)]
    params: serde_json::Map<String, serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    profile_seed: Option<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstantParams {
    a: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PowerParams {
    alpha: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LinLogParams {
    beta: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NoParams {}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TableParams {
    values: Vec<(i64, f64)>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, tag = "law", rename_all = "lowercase")]
enum LawParams {
    Geometric { p: f64 },
    Poisson { lambda: f64 },
    Empirical { weights: Vec<f64> },
}

fn params<T: serde::de::DeserializeOwned>(m: serde_json::Map<String, serde_json::Value>) -> Result<T> {
    serde_json::from_value(serde_json::Value::Object(m))
        .map_err(|e| Error::Config(format!("profile params: {e}")))
}

impl TryFrom<ProfileSpec> for Profile {
    type Error = Error;

    fn try_from(s: ProfileSpec) -> Result<Self> {
        let family = match s.family.as_str() {
            "constant" => Family::Constant(params::<ConstantParams>(s.params)?.a),
            "power" => Family::Power(params::<PowerParams>(s.params)?.alpha),
            "linlog" => Family::LinLog(params::<LinLogParams>(s.params)?.beta),
            "nlogn" => {
                params::<NoParams>(s.params)?;
                Family::NLogN
            }
            "table" => Family::Table(params::<TableParams>(s.params)?.values.into_iter().collect()),
            "iid" => {
                let seed = s
                    .profile_seed
                    .ok_or_else(|| Error::Config("iid profile requires profile_seed".into()))?;
                let law = match params::<LawParams>(s.params)? {
                    LawParams::Geometric { p } => HeightLaw::Geometric { p },
                    LawParams::Poisson { lambda } => HeightLaw::Poisson { lambda },
                    LawParams::Empirical { weights } => HeightLaw::Empirical { weights },
                };
                Family::Iid { law, seed }
            }
            other => return Err(Error::Config(format!("unknown profile family {other:?}"))),
        };
        Profile::new(family)
    }
}

impl From<&Profile> for ProfileSpec {
    fn from(p: &Profile) -> Self {
        use serde_json::{json, Value};
        let (family, params, profile_seed) = match &p.family {
            Family::Constant(a) => ("constant", json!({ "a": a }), None),
            Family::Power(alpha) => ("power", json!({ "alpha": alpha }), None),
            Family::LinLog(beta) => ("linlog", json!({ "beta": beta }), None),
            Family::NLogN => ("nlogn", json!({}), None),
            Family::Table(t) => {
                let values: Vec<(i64, f64)> = t.iter().map(|(k, v)| (*k, *v)).collect();
                ("table", json!({ "values": values }), None)
            }
            Family::Iid { law, seed } => {
                let params = match law {
                    HeightLaw::Geometric { p } => json!({ "law": "geometric", "p": p }),
                    HeightLaw::Poisson { lambda } => json!({ "law": "poisson", "lambda": lambda }),
                    HeightLaw::Empirical { weights } => json!({ "law": "empirical", "weights": weights }),
                };
                ("iid", params, Some(*seed))
            }
        };
        let Value::Object(params) = params else { unreachable!() };
        ProfileSpec { family: family.to_string(), params, profile_seed }
    }
}

impl Serialize for Profile {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ProfileSpec::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Profile {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let spec = ProfileSpec::deserialize(d)?;
        Profile::try_from(spec).map_err(serde::de::Error::custom)
    }
}

impl Profile {
    pub fn from_json(s: &str) -> Result<Self> {
        let spec: ProfileSpec =
            serde_json::from_str(s).map_err(|e| Error::Config(format!("profile: {e}")))?;
        Profile::try_from(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("profile serialises")
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            Family::Constant(a) => write!(f, "Constant({a})"),
            Family::Power(alpha) => write!(f, "Power({alpha})"),
            Family::LinLog(beta) => write!(f, "LinLog({beta})"),
            Family::NLogN => write!(f, "NLogN"),
            Family::Table(t) => write!(f, "Table({} entries)", t.len()),
            Family::Iid { law, seed } => write!(f, "Iid({law:?}, seed={seed})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heights_of_families() {
        assert_eq!(Profile::power(2.0).unwrap().tooth_height(3), 9);
        assert_eq!(Profile::linlog(0.0).unwrap().tooth_height(-5), 5);
        assert_eq!(Profile::linlog(0.0).unwrap().tooth_height(0), 0);
        assert_eq!(Profile::linlog(3.0).unwrap().tooth_height(1), 0);
        assert_eq!(Profile::nlogn().tooth_height(0), 0);
        assert_eq!(Profile::constant(2.7).unwrap().tooth_height(100), 2);
        let t = Profile::table([(3, 4.5), (-1, 1.0)]).unwrap();
        assert_eq!(t.tooth_height(3), 4);
        assert_eq!(t.tooth_height(-1), 1);
        assert_eq!(t.tooth_height(7), 0);
    }

    #[test]
    fn linlog_three_at_eight_and_sixteen() {
        let p = Profile::linlog(3.0).unwrap();
        // 8 ln^3 8 = 71.9..., 16 ln^3 16 = 341.0...
        assert_eq!(p.tooth_height(8), 71);
        assert_eq!(p.tooth_height(16), 341);
    }

    #[test]
    fn power_heights_exact_on_integers() {
        let p = Profile::power(3.0).unwrap();
        for x in 0..2000i64 {
            assert_eq!(p.tooth_height(x), x * x * x);
        }
    }

    #[test]
    fn neighbor_examples() {
        let c1 = Profile::constant(1.0).unwrap();
        let mut n = neighbors(&c1, Vertex::new(0, 0)).unwrap().to_vec();
        n.sort();
        let mut want = vec![Vertex::new(-1, 0), Vertex::new(1, 0), Vertex::new(0, 1), Vertex::new(0, -1)];
        want.sort();
        assert_eq!(n, want);
        assert_eq!(neighbors(&c1, Vertex::new(0, 1)).unwrap().as_slice(), &[Vertex::new(0, 0)]);
        assert!(matches!(
            neighbors(&c1, Vertex::new(0, 2)),
            Err(Error::InvalidVertex { .. })
        ));
        let c0 = Profile::constant(0.0).unwrap();
        assert_eq!(neighbors(&c0, Vertex::new(4, 0)).unwrap().len(), 2);
    }

    #[test]
    fn breve_f_and_sums() {
        let c = Profile::constant(0.5).unwrap();
        assert_eq!(c.breve_f(10), 1.0);
        assert!((c.reciprocal_partial_sum(1000) - 1000.0).abs() < 1e-9);
        let t = Profile::table([(-4, 9.0)]).unwrap();
        assert_eq!(t.breve_f(3), 1.0);
        assert_eq!(t.breve_f(4), 9.0);
        // Running max: every term from n = 4 on is 1/9.
        let s = t.reciprocal_partial_sum(10);
        assert!((s - (3.0 + 7.0 / 9.0)).abs() < 1e-12);
    }

    #[test]
    fn enumerate_counts() {
        let p = Profile::constant(1.0).unwrap();
        assert_eq!(p.enumerate_truncation(100, 10_000).unwrap().len(), 603);
        assert!(matches!(p.enumerate_truncation(100, 602), Err(Error::Resource(_))));
    }

    #[test]
    fn classify_examples() {
        use Verdict::*;
        assert_eq!(Profile::nlogn().classify().verdicts, vec![InfiniteCollision]);
        assert_eq!(Profile::linlog(3.0).unwrap().classify().verdicts, vec![FiniteCollision]);
        assert_eq!(Profile::linlog(1.5).unwrap().classify().primary(), Unknown);
        assert_eq!(Profile::power(2.0).unwrap().classify().primary(), Unknown);
        assert_eq!(Profile::power(1.0).unwrap().classify().primary(), InfiniteCollision);
        let c = Profile::constant(1.0).unwrap().classify();
        assert!(c.contains(InfiniteCollision) && c.contains(TripleCollision));
        let iid = Profile::iid(HeightLaw::Geometric { p: 0.5 }, 1).unwrap().classify();
        assert!(iid.contains(TripleCollision));
    }

    #[test]
    fn rejects_bad_params() {
        assert!(Profile::power(0.0).is_err());
        assert!(Profile::power(f64::NAN).is_err());
        assert!(Profile::constant(-1.0).is_err());
        assert!(Profile::linlog(-0.5).is_err());
        assert!(Profile::iid(HeightLaw::Geometric { p: 0.0 }, 0).is_err());
        assert!(Profile::iid(HeightLaw::Empirical { weights: vec![0.0, 0.0] }, 0).is_err());
    }

    #[test]
    fn json_round_trip() {
        let ps = [
            Profile::constant(3.0).unwrap(),
            Profile::power(1.5).unwrap(),
            Profile::linlog(3.0).unwrap(),
            Profile::nlogn(),
            Profile::table([(0, 2.0), (-3, 1.5)]).unwrap(),
            Profile::iid(HeightLaw::Poisson { lambda: 2.0 }, 17).unwrap(),
            Profile::iid(HeightLaw::Empirical { weights: vec![1.0, 2.0, 1.0] }, 5).unwrap(),
        ];
        for p in ps {
            let back = Profile::from_json(&p.to_json()).unwrap();
            assert_eq!(back, p);
        }
    }

    #[test]
    fn json_rejects_unknown_and_malformed() {
        assert!(Profile::from_json(r#"{"family":"power","params":{"alpha":2,"x":1}}"#).is_err());
        assert!(Profile::from_json(r#"{"family":"power","params":{"alpha":2},"extra":0}"#).is_err());
        assert!(Profile::from_json(r#"{"family":"zigzag"}"#).is_err());
        assert!(Profile::from_json(r#"{"family":"iid","params":{"law":"geometric","p":0.5}}"#).is_err());
        assert!(Profile::from_json("{").is_err());
    }

    #[test]
    fn iid_heights_stateless() {
        let p = Profile::iid(HeightLaw::Geometric { p: 0.3 }, 42).unwrap();
        let a: Vec<i64> = (-50..50).map(|x| p.tooth_height(x)).collect();
        let b: Vec<i64> = (-50..50).rev().map(|x| p.tooth_height(x)).rev().collect();
        assert_eq!(a, b);
        let q = Profile::iid(HeightLaw::Geometric { p: 0.3 }, 43).unwrap();
        assert_ne!(a, (-50..50).map(|x| q.tooth_height(x)).collect::<Vec<_>>());
    }

    #[test]
    fn iid_geometric_mean() {
        let p = Profile::iid(HeightLaw::Geometric { p: 0.25 }, 9).unwrap();
        let n = 200_000;
        let mean = (0..n).map(|x| p.tooth_height(x) as f64).sum::<f64>() / n as f64;
        // mean (1 - p)/p = 3, sd = sqrt(12)
        assert!((mean - 3.0).abs() < 5.0 * (12.0f64 / n as f64).sqrt(), "{mean}");
    }

    #[test]
    fn height_cache_matches_profile() {
        let p = Profile::iid(HeightLaw::Poisson { lambda: 3.0 }, 2).unwrap();
        let mut c = HeightCache::new(&p);
        for x in [5, -3, 0, 40, -41, 7] {
            assert_eq!(c.get(x), p.tooth_height(x));
        }
    }
}
