//! Single-walker simulation and the derived sequences.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::profile::{HeightCache, Profile, Vertex};
use crate::rng::RngStream;

/// One step of the simple random walk from `v`. Returns the new vertex and
/// whether the move was horizontal. Consumes exactly one draw.
#[inline]
pub fn step(cache: &mut HeightCache<'_>, v: Vertex, rng: &mut RngStream) -> (Vertex, bool) {
    let h = cache.get(v.x);
    if v.y == 0 {
        let deg = if h >= 1 { 4 } else { 2 };
        match rng.below(deg) {
            0 => (Vertex::new(v.x - 1, 0), true),
            1 => (Vertex::new(v.x + 1, 0), true),
            2 => (Vertex::new(v.x, 1), false),
            _ => (Vertex::new(v.x, -1), false),
        }
    } else {
        let s = v.y.signum();
        let r = rng.next_u64();
        if v.y.abs() >= h || r >> 63 == 0 {
            (Vertex::new(v.x, v.y - s), false)
        } else {
            (Vertex::new(v.x, v.y + s), false)
        }
    }
}

/// Condition that ends a simulation before the horizon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum EarlyExit {
    /// Stop at `theta_n`, the first time `|x| >= n`.
    ExitRadius(u64),
    /// Stop at the first visit to the vertex.
    HitVertex(Vertex),
    /// Stop at the `k`-th horizontal move.
    HorizontalMoves(u64),
}

impl EarlyExit {
    fn fired(&self, v: Vertex, moves: u64) -> bool {
        match *self {
            EarlyExit::ExitRadius(n) => v.x.unsigned_abs() >= n,
            EarlyExit::HitVertex(t) => v == t,
            EarlyExit::HorizontalMoves(k) => moves >= k,
        }
    }
}

/// Which stopping times to record.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StopSpec {
    /// Radii `n` for `theta_n = inf{m >= 0: |x_m| >= n}`.
    pub theta_radii: Vec<u64>,
    /// Targets for `tau_v = inf{m >= 0: X_m = v}`.
    pub tau_targets: Vec<Vertex>,
    pub early_exit: Option<EarlyExit>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StopRecord {
    /// `T_0 = 0` followed by the times of horizontal moves.
    pub horizontal_times: Vec<u64>,
    pub theta: Vec<(u64, Option<u64>)>,
    pub tau: Vec<(Vertex, Option<u64>)>,
}

impl StopRecord {
    pub fn theta(&self, n: u64) -> Option<u64> {
        self.theta.iter().find(|(r, _)| *r == n).and_then(|(_, t)| *t)
    }

    pub fn tau(&self, v: Vertex) -> Option<u64> {
        self.tau.iter().find(|(t, _)| *t == v).and_then(|(_, t)| *t)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// `X_0, ..., X_H`.
    pub path: Vec<Vertex>,
    /// An early exit was requested and did not fire before the horizon.
    pub censored: bool,
}

impl Trajectory {
    pub fn start(&self) -> Vertex {
        self.path[0]
    }

    /// Index of the last recorded step.
    pub fn last_time(&self) -> u64 {
        self.path.len() as u64 - 1
    }

    pub fn u(&self) -> Vec<i64> {
        self.path.iter().map(|v| v.x).collect()
    }

    pub fn v(&self) -> Vec<i64> {
        self.path.iter().map(|v| v.y).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n,x,y")?;
        for (n, v) in self.path.iter().enumerate() {
            writeln!(w, "{n},{},{}", v.x, v.y)?;
        }
        Ok(())
    }
}

pub(crate) struct Recorder {
    rec: StopRecord,
    moves: u64,
}

impl Recorder {
    pub(crate) fn new(stops: &StopSpec) -> Self {
        Self {
            rec: StopRecord {
                horizontal_times: vec![0],
                theta: stops.theta_radii.iter().map(|r| (*r, None)).collect(),
                tau: stops.tau_targets.iter().map(|v| (*v, None)).collect(),
            },
            moves: 0,
        }
    }

    pub(crate) fn observe(&mut self, n: u64, v: Vertex, horizontal: bool) {
        if horizontal {
            self.rec.horizontal_times.push(n);
            self.moves += 1;
        }
        for (r, t) in &mut self.rec.theta {
            if t.is_none() && v.x.unsigned_abs() >= *r {
                *t = Some(n);
            }
        }
        for (target, t) in &mut self.rec.tau {
            if t.is_none() && *target == v {
                *t = Some(n);
            }
        }
    }

    pub(crate) fn moves(&self) -> u64 {
        self.moves
    }

    pub(crate) fn finish(self) -> StopRecord {
        self.rec
    }
}

/// Simulates `X_0 = start, ..., X_horizon` (or up to the early exit).
pub fn simulate(
    profile: &Profile,
    start: Vertex,
    horizon: u64,
    stops: &StopSpec,
    rng: &mut RngStream,
) -> Result<(Trajectory, StopRecord)> {
    if horizon == 0 {
        return arg("horizon must be positive");
    }
    profile.check_vertex(start)?;
    let mut cache = HeightCache::new(profile);
    let mut rec = Recorder::new(stops);
    let mut path = Vec::with_capacity((horizon as usize).min(1 << 20) + 1);
    path.push(start);
    rec.observe(0, start, false);
    let mut fired = stops.early_exit.as_ref().is_some_and(|e| e.fired(start, 0));
    let mut v = start;
    let mut n = 0;
    while n < horizon && !fired {
        if v.x.unsigned_abs() >= (i64::MAX - 1) as u64 {
            return Err(Error::Resource("coordinate overflow".into()));
        }
        let (next, horizontal) = step(&mut cache, v, rng);
        n += 1;
        v = next;
        path.push(v);
        rec.observe(n, v, horizontal);
        fired = stops.early_exit.as_ref().is_some_and(|e| e.fired(v, rec.moves()));
    }
    let censored = stops.early_exit.is_some() && !fired;
    Ok((Trajectory { path, censored }, rec.finish()))
}

/// `W_k = U_{T_k}` over the recorded horizontal move times.
pub fn embedded_walk(traj: &Trajectory, rec: &StopRecord) -> Vec<i64> {
    rec.horizontal_times.iter().map(|&t| traj.path[t as usize].x).collect()
}

/// `xi(x, n) = |{m in [0, n]: seq[m] = x}|`.
pub fn local_time(seq: &[i64], x: i64, n: u64) -> Result<u64> {
    if n as usize >= seq.len() {
        return arg(format!("local time index {n} outside sequence of length {}", seq.len()));
    }
    Ok(seq[..=n as usize].iter().filter(|&&w| w == x).count() as u64)
}

/// Durations of the complete sojourns of the embedded walk at column `x`.
///
/// The sojourn still in progress at the horizon is omitted, so the sum of
/// all durations over all columns is at most the horizon.
pub fn excursion_durations(traj: &Trajectory, rec: &StopRecord, x: i64) -> Vec<u64> {
    let t = &rec.horizontal_times;
    t.windows(2)
        .filter(|w| traj.path[w[0] as usize].x == x)
        .map(|w| w[1] - w[0])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(p: &Profile, start: Vertex, h: u64, seed: u64) -> (Trajectory, StopRecord) {
        simulate(p, start, h, &StopSpec::default(), &mut RngStream::new(seed)).unwrap()
    }

    #[test]
    fn steps_are_edges() {
        let p = Profile::power(1.5).unwrap();
        let (t, _) = run(&p, Vertex::new(0, 0), 20_000, 1);
        for w in t.path.windows(2) {
            let (a, b) = (w[0], w[1]);
            let horiz = a.y == 0 && b.y == 0 && (a.x - b.x).abs() == 1;
            let vert = a.x == b.x && (a.y - b.y).abs() == 1;
            assert!(horiz || vert, "{a} -> {b}");
            assert!(b.y.abs() <= p.tooth_height(b.x));
            assert_ne!(a.parity(), b.parity());
        }
    }

    #[test]
    fn zero_horizon_rejected() {
        let p = Profile::constant(1.0).unwrap();
        let r = simulate(&p, Vertex::new(0, 0), 0, &StopSpec::default(), &mut RngStream::new(0));
        assert!(matches!(r, Err(Error::Argument(_))));
        let r = simulate(&p, Vertex::new(0, 5), 10, &StopSpec::default(), &mut RngStream::new(0));
        assert!(matches!(r, Err(Error::InvalidVertex { .. })));
    }

    #[test]
    fn constant_zero_is_srw_on_z() {
        let p = Profile::constant(0.0).unwrap();
        let (t, rec) = run(&p, Vertex::new(0, 0), 1000, 5);
        assert!(t.path.iter().all(|v| v.y == 0));
        assert_eq!(rec.horizontal_times.len(), 1001);
        assert_eq!(embedded_walk(&t, &rec), t.u());
    }

    #[test]
    fn tip_of_height_one_returns() {
        let p = Profile::constant(1.0).unwrap();
        let (t, _) = run(&p, Vertex::new(3, 1), 1, 0);
        assert_eq!(t.path[1], Vertex::new(3, 0));
        let (t, _) = run(&p, Vertex::new(3, -1), 1, 0);
        assert_eq!(t.path[1], Vertex::new(3, 0));
    }

    #[test]
    fn deterministic_given_seed() {
        let p = Profile::nlogn();
        assert_eq!(run(&p, Vertex::new(2, 0), 5000, 77).0, run(&p, Vertex::new(2, 0), 5000, 77).0);
    }

    #[test]
    fn stop_times_recorded() {
        let p = Profile::constant(2.0).unwrap();
        let stops = StopSpec {
            theta_radii: vec![1, 5],
            tau_targets: vec![Vertex::new(0, 2)],
            early_exit: Some(EarlyExit::ExitRadius(5)),
        };
        let (t, rec) = simulate(&p, Vertex::new(0, 0), 1_000_000, &stops, &mut RngStream::new(4)).unwrap();
        assert!(!t.censored);
        let th5 = rec.theta(5).unwrap();
        assert_eq!(th5, t.last_time());
        assert_eq!(t.path[th5 as usize].x.abs(), 5);
        assert!(t.path[..th5 as usize].iter().all(|v| v.x.abs() < 5));
        let th1 = rec.theta(1).unwrap();
        assert!(th1 <= th5 && th1 >= 1);
        if let Some(tau) = rec.tau(Vertex::new(0, 2)) {
            assert_eq!(t.path[tau as usize], Vertex::new(0, 2));
        }
    }

    #[test]
    fn censored_when_exit_not_reached() {
        let p = Profile::constant(3.0).unwrap();
        let stops = StopSpec { early_exit: Some(EarlyExit::ExitRadius(1000)), ..Default::default() };
        let (t, _) = simulate(&p, Vertex::new(0, 0), 50, &stops, &mut RngStream::new(1)).unwrap();
        assert!(t.censored);
        assert_eq!(t.path.len(), 51);
    }

    #[test]
    fn local_time_bounds() {
        let seq = [0, 1, 0, -1, 0];
        assert_eq!(local_time(&seq, 0, 4).unwrap(), 3);
        assert_eq!(local_time(&seq, 0, 0).unwrap(), 1);
        assert!(local_time(&seq, 0, 5).is_err());
    }

    #[test]
    fn excursions_sum_below_horizon() {
        let p = Profile::constant(4.0).unwrap();
        let (t, rec) = run(&p, Vertex::new(0, 0), 10_000, 8);
        let w = embedded_walk(&t, &rec);
        let (lo, hi) = (*w.iter().min().unwrap(), *w.iter().max().unwrap());
        let total: u64 = (lo..=hi).flat_map(|x| excursion_durations(&t, &rec, x)).sum();
        assert!(total <= 10_000);
        assert!(excursion_durations(&t, &rec, 0).iter().all(|d| *d >= 1));
    }

    #[test]
    fn csv_dump() {
        let p = Profile::constant(0.0).unwrap();
        let (t, _) = run(&p, Vertex::new(0, 0), 3, 0);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("n,x,y\n0,0,0\n"));
        assert_eq!(s.lines().count(), 5);
    }
}
