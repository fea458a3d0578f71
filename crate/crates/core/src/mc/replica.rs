//! One replica of each estimator.

use crate::collision::Outcome;
use crate::error::{Error, Result};
use crate::fast::{run_fast, FastTables, Observer, RunEnd, WalkerView};
use crate::profile::{HeightCache, Profile, Vertex};
use crate::rng::RngStream;
use crate::walk::step;

use super::EstimatorSpec;

/// Result of one replica.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Sample {
    Hit(bool),
    Value(f64),
    Censored,
}

fn all_meet(ws: &[WalkerView]) -> bool {
    match ws[0].pos {
        Some(p) => ws[1..].iter().all(|w| w.pos == Some(p)),
        None => false,
    }
}

fn any_beyond(ws: &[WalkerView], r: u64) -> bool {
    ws.iter().any(|w| w.pos.is_some_and(|p| p.x.unsigned_abs() >= r))
}

/// Every walker meets before any reaches `|x| >= radius`.
pub struct MeetBeforeExit {
    pub radius: u64,
    pub result: Option<bool>,
}

impl Observer for MeetBeforeExit {
    fn observe(&mut self, _now: u64, ws: &[WalkerView]) -> bool {
        if any_beyond(ws, self.radius) {
            self.result = Some(false);
        } else if all_meet(ws) {
            self.result = Some(true);
        }
        self.result.is_some()
    }
}

/// Whether the exit comes no later than the `target`-th sigma time.
pub struct SigmaRace {
    pub target: u64,
    pub radius: u64,
    pub count: u64,
    pub exceeded: Option<bool>,
}

impl Observer for SigmaRace {
    fn observe(&mut self, now: u64, ws: &[WalkerView]) -> bool {
        if any_beyond(ws, self.radius) {
            self.exceeded = Some(true);
            return true;
        }
        if now > 0 && ws.iter().any(|w| w.moved) && ws[0].col == ws[1].col {
            self.count += 1;
            if self.count >= self.target {
                self.exceeded = Some(false);
                return true;
            }
        }
        false
    }
}

/// Meetings inside `{(k, y): 0 <= y <= h}`.
pub struct ToothMeetings {
    pub k: i64,
    pub h: i64,
    pub count: u64,
}

impl Observer for ToothMeetings {
    fn observe(&mut self, _now: u64, ws: &[WalkerView]) -> bool {
        if all_meet(ws) {
            let p = ws[0].pos.unwrap();
            if p.x == self.k && (0..=self.h).contains(&p.y) {
                self.count += 1;
            }
        }
        false
    }
}

/// Meetings in the windows between successive exit radii `d^m`.
pub struct Windows {
    pub d: u64,
    pub m_max: u32,
    /// Largest `m` with `d^m` reached by some walker.
    pub level: u32,
    pub hit: Vec<bool>,
}

impl Windows {
    pub fn new(d: u64, m_max: u32) -> Self {
        Self { d, m_max, level: 0, hit: vec![false; m_max as usize + 2] }
    }

    pub fn outcomes(&self) -> Vec<Outcome> {
        (1..=self.m_max)
            .map(|m| {
                if self.hit[m as usize] {
                    Outcome::Yes
                } else if self.level > m {
                    Outcome::No
                } else {
                    Outcome::Censored
                }
            })
            .collect()
    }
}

impl Observer for Windows {
    fn observe(&mut self, _now: u64, ws: &[WalkerView]) -> bool {
        while self.level <= self.m_max && any_beyond(ws, self.d.saturating_pow(self.level + 1)) {
            self.level += 1;
        }
        if self.level > self.m_max {
            return true;
        }
        if self.level >= 1 && all_meet(ws) {
            self.hit[self.level as usize] = true;
        }
        false
    }
}

fn spread_starts(n: u64) -> Result<[Vertex; 2]> {
    let n = i64::try_from(n).map_err(|_| Error::Argument("N too large".into()))?;
    Ok([Vertex::spine(-n), Vertex::spine(n)])
}

fn exit_radius(n: u64, d: u64) -> Result<u64> {
    if n == 0 || d < 2 {
        return Err(Error::Argument(format!("need N >= 1 and d >= 2, got N = {n}, d = {d}")));
    }
    n.checked_mul(d).ok_or_else(|| Error::Argument("d N overflows".into()))
}

/// Checks the estimator's preconditions against the profile.
pub fn validate(spec: &EstimatorSpec, profile: &Profile) -> Result<()> {
    let bad = |m: String| Err(Error::Config(m));
    match *spec {
        EstimatorSpec::GamblerRuin { v } => {
            if v < 1 || profile.tooth_height(0) < 2 * v {
                return bad(format!("GamblerRuin needs 1 <= v and 2v <= tooth height at 0 ({})", profile.tooth_height(0)));
            }
        }
        EstimatorSpec::PsiZero { u, v, .. } | EstimatorSpec::ToothH { u, v, .. } => {
            let h = profile.tooth_height(u);
            if !(0..=h).contains(&v) {
                return bad(format!("v = {v} outside [0, {h}] at column {u}"));
            }
            if let EstimatorSpec::ToothH { h: Some(hh), .. } = *spec {
                if hh != h {
                    return bad(format!("ToothH h = {hh} differs from tooth height {h} at column {u}"));
                }
            }
        }
        EstimatorSpec::CollisionBeforeExit { n, d }
        | EstimatorSpec::SigmaRace { n, d }
        | EstimatorSpec::TripleBeforeExit { n, d } => {
            exit_radius(n, d).map_err(|e| Error::Config(e.to_string()))?;
        }
        EstimatorSpec::ZkhMean { k, h } => {
            let top = profile.tooth_height(k);
            if let Some(h) = h {
                if !(0..=top).contains(&h) {
                    return bad(format!("h = {h} outside [0, {top}] at column {k}"));
                }
            }
        }
        EstimatorSpec::LocalTimeQuantile { n, q } => {
            if n == 0 || !(q > 0.0 && q < 1.0) {
                return bad("LocalTimeQuantile needs N >= 1 and 0 < q < 1".into());
            }
        }
        EstimatorSpec::UpsilonWindows { d, m_max } => {
            if d < 2 || m_max == 0 || d.checked_pow(m_max + 1).is_none() {
                return bad("UpsilonWindows needs d >= 2, m_max >= 1 and d^(m_max+1) in range".into());
            }
        }
    }
    Ok(())
}

/// Runs replica `seed` of `spec`. Walker `j` uses stream `child(seed, j)`.
pub fn run_replica(spec: &EstimatorSpec, profile: &Profile, horizon: u64, seed: u64) -> Result<Sample> {
    let tables = FastTables::standard();
    Ok(match *spec {
        EstimatorSpec::GamblerRuin { v } => gambler_ruin(profile, v, horizon, seed),
        EstimatorSpec::PsiZero { u, v, .. } => psi_zero(profile, u, v, horizon, seed),
        EstimatorSpec::ToothH { u, v, .. } => tooth_h(profile, u, v, horizon, seed),
        EstimatorSpec::CollisionBeforeExit { n, d } => {
            let mut obs = MeetBeforeExit { radius: exit_radius(n, d)?, result: None };
            run_fast(profile, tables, &spread_starts(n)?, seed, horizon, &mut obs)?;
            obs.result.map_or(Sample::Censored, Sample::Hit)
        }
        EstimatorSpec::SigmaRace { n, d } => {
            let mut obs = SigmaRace { target: n, radius: exit_radius(n, d)?, count: 0, exceeded: None };
            run_fast(profile, tables, &spread_starts(n)?, seed, horizon, &mut obs)?;
            obs.exceeded.map_or(Sample::Censored, Sample::Hit)
        }
        EstimatorSpec::TripleBeforeExit { n, d } => {
            let [a, b] = spread_starts(n)?;
            let mid = Vertex::spine((n % 2) as i64);
            let mut obs = MeetBeforeExit { radius: exit_radius(n, d)?, result: None };
            run_fast(profile, tables, &[a, mid, b], seed, horizon, &mut obs)?;
            obs.result.map_or(Sample::Censored, Sample::Hit)
        }
        EstimatorSpec::ZkhMean { k, h } => {
            let h = h.unwrap_or_else(|| profile.tooth_height(k));
            let mut obs = ToothMeetings { k, h, count: 0 };
            run_fast(profile, tables, &[Vertex::spine(0); 2], seed, horizon, &mut obs)?;
            Sample::Value(obs.count as f64)
        }
        EstimatorSpec::LocalTimeQuantile { n, .. } => local_time(profile, n, horizon, seed),
        EstimatorSpec::UpsilonWindows { d, m_max } => {
            let mut obs = Windows::new(d, m_max);
            let end = run_fast(profile, tables, &[Vertex::spine(0); 2], seed, horizon, &mut obs)?;
            let out = obs.outcomes();
            if end == RunEnd::Horizon && out.contains(&Outcome::Censored) {
                Sample::Censored
            } else {
                Sample::Value(out.iter().filter(|o| **o == Outcome::Yes).count() as f64 / m_max as f64)
            }
        }
    })
}

fn gambler_ruin(profile: &Profile, v: i64, horizon: u64, seed: u64) -> Sample {
    let mut cache = HeightCache::new(profile);
    let mut rng = RngStream::child(seed, 0);
    let mut p = Vertex::new(0, 1);
    for _ in 0..horizon {
        p = step(&mut cache, p, &mut rng).0;
        if p.y == 0 {
            return Sample::Hit(false);
        }
        if p.y == 2 * v {
            return Sample::Hit(true);
        }
    }
    Sample::Censored
}

fn psi_zero(profile: &Profile, u: i64, v: i64, horizon: u64, seed: u64) -> Sample {
    let mut cache = HeightCache::new(profile);
    let (mut ra, mut rb) = (RngStream::child(seed, 0), RngStream::child(seed, 1));
    let (mut a, mut b) = (Vertex::spine(u), Vertex::new(u, v));
    if a == b {
        return Sample::Hit(true);
    }
    for _ in 0..horizon {
        a = step(&mut cache, a, &mut ra).0;
        b = step(&mut cache, b, &mut rb).0;
        if a.y == 0 || b.y == 0 {
            return Sample::Hit(false);
        }
        if a == b && a.y.abs() + b.y.abs() >= v {
            return Sample::Hit(true);
        }
    }
    Sample::Censored
}

fn tooth_h(profile: &Profile, u: i64, v: i64, horizon: u64, seed: u64) -> Sample {
    let mut cache = HeightCache::new(profile);
    let (mut ra, mut rb) = (RngStream::child(seed, 0), RngStream::child(seed, 1));
    let base = Vertex::spine(u);
    let (mut a, mut b) = (base, Vertex::new(u, v));
    let mut count = u64::from(a == b);
    for _ in 0..horizon {
        a = step(&mut cache, a, &mut ra).0;
        b = step(&mut cache, b, &mut rb).0;
        if a == base || b == base || a.x != u || b.x != u {
            return Sample::Value(count as f64);
        }
        if a == b && a.y >= 0 {
            count += 1;
        }
    }
    Sample::Censored
}

fn local_time(profile: &Profile, n: u64, horizon: u64, seed: u64) -> Sample {
    let target = n.saturating_mul(n);
    let mut cache = HeightCache::new(profile);
    let mut rng = RngStream::child(seed, 0);
    let mut p = Vertex::spine(0);
    let (mut moves, mut xi) = (0u64, 1u64);
    for _ in 0..horizon {
        if moves >= target {
            break;
        }
        let (next, horizontal) = step(&mut cache, p, &mut rng);
        p = next;
        if horizontal {
            moves += 1;
            if p.x == 0 {
                xi += 1;
            }
        }
    }
    if moves >= target {
        Sample::Value(xi as f64)
    } else {
        Sample::Censored
    }
}
