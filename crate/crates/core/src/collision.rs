//! Pair and triple runs and the collision statistics extracted from them.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{arg, Result};
use crate::profile::{HeightCache, Profile, Vertex};
use crate::rng::RngStream;
use crate::walk::{step, EarlyExit, Recorder, StopRecord, StopSpec, Trajectory};

/// Synchronised walkers with independent streams `child(master, j)`.
///
/// The early exit, if any, fires when any walker meets it; all
/// trajectories are cut at that common time.
pub fn run_group(
    profile: &Profile,
    starts: &[Vertex],
    horizon: u64,
    stops: &StopSpec,
    master_seed: u64,
) -> Result<(Vec<Trajectory>, Vec<StopRecord>)> {
    for s in starts {
        profile.check_vertex(*s)?;
    }
    let mut cache = HeightCache::new(profile);
    let k = starts.len();
    let mut rngs: Vec<RngStream> = (0..k as u64).map(|j| RngStream::child(master_seed, j)).collect();
    let mut recs: Vec<Recorder> = (0..k).map(|_| Recorder::new(stops)).collect();
    let mut paths: Vec<Vec<Vertex>> = starts.iter().map(|s| vec![*s]).collect();
    let mut pos = starts.to_vec();
    let fired_at = |pos: &[Vertex], recs: &[Recorder]| match &stops.early_exit {
        None => false,
        Some(EarlyExit::ExitRadius(r)) => pos.iter().any(|v| v.x.unsigned_abs() >= *r),
        Some(EarlyExit::HitVertex(t)) => pos.iter().any(|v| v == t),
        Some(EarlyExit::HorizontalMoves(m)) => recs.iter().any(|r| r.moves() >= *m),
    };
    for j in 0..k {
        recs[j].observe(0, pos[j], false);
    }
    let mut fired = fired_at(&pos, &recs);
    let mut n = 0;
    while n < horizon && !fired {
        n += 1;
        for j in 0..k {
            let (next, horiz) = step(&mut cache, pos[j], &mut rngs[j]);
            pos[j] = next;
            paths[j].push(next);
            recs[j].observe(n, next, horiz);
        }
        fired = fired_at(&pos, &recs);
    }
    let censored = stops.early_exit.is_some() && !fired;
    let trajs = paths.into_iter().map(|path| Trajectory { path, censored }).collect();
    Ok((trajs, recs.into_iter().map(Recorder::finish).collect()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRun {
    pub a: Trajectory,
    pub b: Trajectory,
    pub rec_a: StopRecord,
    pub rec_b: StopRecord,
    /// Times `n` with `X_n = X'_n`.
    pub collisions: Vec<u64>,
    /// `sigma_0 = 0` followed by the times a walker moves horizontally onto
    /// the other's column.
    pub sigma: Vec<u64>,
    /// `Z_{2n} = U_n - U'_n`, `Z_{2n+1} = U_{n+1} - U'_n`.
    pub z_seq: Vec<i64>,
    /// Jump times `tau_m` of `Z`, starting with `tau_0 = 0`.
    pub z_jump_times: Vec<u64>,
    /// The walkers start with different parity, so they can never meet.
    pub parity_warning: bool,
}

impl PairRun {
    pub fn last_time(&self) -> u64 {
        self.a.last_time()
    }

    /// `Z_{tau_m}` for every recorded jump time.
    pub fn z_jump_chain(&self) -> Vec<i64> {
        self.z_jump_times.iter().map(|&t| self.z_seq[t as usize]).collect()
    }

    /// `U_n + V_n + U'_n + V'_n mod 2`.
    pub fn parity(&self, n: u64) -> u8 {
        let (a, b) = (self.a.path[n as usize], self.b.path[n as usize]);
        (a.parity() + b.parity()) % 2
    }
}

/// Runs two walkers. A zero horizon yields the starting configuration only.
pub fn run_pair(
    profile: &Profile,
    starts: [Vertex; 2],
    horizon: u64,
    stops: &StopSpec,
    master_seed: u64,
) -> Result<PairRun> {
    let (mut trajs, mut recs) = run_group(profile, &starts, horizon, stops, master_seed)?;
    let b = trajs.pop().unwrap();
    let a = trajs.pop().unwrap();
    let rec_b = recs.pop().unwrap();
    let rec_a = recs.pop().unwrap();
    let collisions = (0..a.path.len() as u64).filter(|&n| a.path[n as usize] == b.path[n as usize]).collect();
    let mut sigma = vec![0];
    for n in 1..a.path.len() {
        let moved = a.path[n].x != a.path[n - 1].x || b.path[n].x != b.path[n - 1].x;
        if moved && a.path[n].x == b.path[n].x {
            sigma.push(n as u64);
        }
    }
    let h = a.path.len() - 1;
    let mut z_seq = Vec::with_capacity(2 * h + 1);
    for n in 0..=h {
        z_seq.push(a.path[n].x - b.path[n].x);
        if n < h {
            z_seq.push(a.path[n + 1].x - b.path[n].x);
        }
    }
    let mut z_jump_times = vec![0];
    for i in 1..z_seq.len() {
        if z_seq[i] != z_seq[i - 1] {
            z_jump_times.push(i as u64);
        }
    }
    let parity_warning = starts[0].parity() != starts[1].parity();
    Ok(PairRun { a, b, rec_a, rec_b, collisions, sigma, z_seq, z_jump_times, parity_warning })
}

/// Three-valued result for events that may be cut off by the horizon.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Yes,
    No,
    Censored,
}

/// The event `Psi_m`: between `sigma_m` and the first later time either
/// walker is on the spine, the walkers meet at total depth at least the
/// total depth at `sigma_m`.
pub fn psi_event(pair: &PairRun, m: usize) -> Outcome {
    let Some(&s) = pair.sigma.get(m) else {
        return Outcome::Censored;
    };
    let (a, b) = (&pair.a.path, &pair.b.path);
    let depth = |n: usize| a[n].y.abs() + b[n].y.abs();
    let d0 = depth(s as usize);
    for n in s as usize..a.len() {
        if n > s as usize && (a[n].y == 0 || b[n].y == 0) {
            return Outcome::No;
        }
        if a[n] == b[n] && depth(n) >= d0 {
            return Outcome::Yes;
        }
    }
    Outcome::Censored
}

/// A count that may be incomplete because the horizon came first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Count {
    pub value: u64,
    pub censored: bool,
}

/// `H`: meetings in the upper tooth `{(u, y): y >= 0}` of the starting column
/// strictly before either walker returns to `(u, 0)` at a positive time.
///
/// The walkers must start at `(u, 0)` and `(u, v)` with `v >= 0`. Once a
/// walker leaves the column before its return, no later meeting can count.
pub fn tooth_collision_count(pair: &PairRun) -> Result<Count> {
    let (a, b) = (&pair.a.path, &pair.b.path);
    let (s, t) = (a[0], b[0]);
    if s.y != 0 || t.x != s.x || t.y < 0 {
        return arg("tooth collision count needs starts (u, 0) and (u, v) with v >= 0");
    }
    let base = s;
    let mut value = 0;
    for n in 0..a.len() {
        if n > 0 && (a[n] == base || b[n] == base) {
            return Ok(Count { value, censored: false });
        }
        if a[n].x != base.x || b[n].x != base.x {
            return Ok(Count { value, censored: false });
        }
        if a[n] == b[n] && a[n].y >= 0 {
            value += 1;
        }
    }
    Ok(Count { value, censored: true })
}

/// `(Z_{k,h}, Z~)`: meetings in `Q_{k,h} = {(k, y): 0 <= y <= h}` and the
/// middle-third count `Z_{k, floor(2h/3)} - Z_{k, floor(h/3)}`.
pub fn z_kh_count(trajs: &[Trajectory], profile: &Profile, k: i64, h: i64) -> Result<(u64, u64)> {
    let top = profile.tooth_height(k);
    if h < 0 || h > top {
        return arg(format!("h = {h} outside [0, {top}] at column {k}"));
    }
    let in_q = |v: Vertex, hh: i64| v.x == k && (0..=hh).contains(&v.y);
    let count = |hh: i64| {
        (0..trajs[0].path.len())
            .filter(|&n| {
                let v = trajs[0].path[n];
                trajs[1..].iter().all(|t| t.path[n] == v) && in_q(v, hh)
            })
            .count() as u64
    };
    let z = count(h);
    let tilde = count(2 * h / 3) - count(h / 3);
    Ok((z, tilde))
}

fn first_exit(t: &Trajectory, r: u64) -> Option<u64> {
    t.path.iter().position(|v| v.x.unsigned_abs() >= r).map(|n| n as u64)
}

fn group_exit(trajs: &[Trajectory], r: u64) -> Option<u64> {
    trajs.iter().filter_map(|t| first_exit(t, r)).min()
}

fn all_meet(trajs: &[Trajectory], n: usize) -> bool {
    let v = trajs[0].path[n];
    trajs[1..].iter().all(|t| t.path[n] == v)
}

/// For `m = 1..=m_max`, whether all walkers meet in
/// `[theta_{d^m} ^ ..., theta_{d^{m+1}} ^ ...)`.
pub fn upsilon_windows(trajs: &[Trajectory], d: u64, m_max: u32) -> Result<Vec<Outcome>> {
    if d < 2 {
        return arg("window base d must be at least 2");
    }
    let mut out = Vec::with_capacity(m_max as usize);
    for m in 1..=m_max {
        let (Some(lo), Some(hi)) = (d.checked_pow(m), d.checked_pow(m + 1)) else {
            return arg("window radius overflows");
        };
        let Some(start) = group_exit(trajs, lo) else {
            out.push(Outcome::Censored);
            continue;
        };
        let end = group_exit(trajs, hi);
        let stop = end.unwrap_or(trajs[0].last_time() + 1);
        let hit = (start..stop).any(|n| all_meet(trajs, n as usize));
        out.push(match (hit, end) {
            (true, _) => Outcome::Yes,
            (false, Some(_)) => Outcome::No,
            (false, None) => Outcome::Censored,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripleRun {
    pub trajs: Vec<Trajectory>,
    /// Times all three walkers share a vertex.
    pub triple_collisions: Vec<u64>,
    /// First time any walker reaches `|x| >= d N`.
    pub theta: Option<u64>,
}

pub fn run_triple(
    profile: &Profile,
    starts: [Vertex; 3],
    horizon: u64,
    d: u64,
    big_n: u64,
    master_seed: u64,
) -> Result<TripleRun> {
    let (trajs, _) = run_group(profile, &starts, horizon, &StopSpec::default(), master_seed)?;
    let triple_collisions = (0..trajs[0].path.len()).filter(|&n| all_meet(&trajs, n)).map(|n| n as u64).collect();
    let theta = group_exit(&trajs, d.saturating_mul(big_n));
    Ok(TripleRun { trajs, triple_collisions, theta })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionSummary {
    pub total: u64,
    /// Index 0 covers `[0, theta_d)`, index `m >= 1` the window `Upsilon_m`.
    pub windows: Vec<u64>,
    /// End of the last complete window, if reached.
    pub covered_until: Option<u64>,
    /// `((k, h), Z_{k,h})` for each requested tooth.
    pub teeth: Vec<((i64, i64), u64)>,
}

pub fn summarize(
    trajs: &[Trajectory],
    profile: &Profile,
    d: u64,
    m_max: u32,
    teeth: &[(i64, i64)],
) -> Result<CollisionSummary> {
    if d < 2 {
        return arg("window base d must be at least 2");
    }
    let times: Vec<u64> = (0..trajs[0].path.len()).filter(|&n| all_meet(trajs, n)).map(|n| n as u64).collect();
    let mut bounds = vec![0u64];
    let mut covered_until = None;
    for m in 1..=m_max + 1 {
        match d.checked_pow(m).and_then(|r| group_exit(trajs, r)) {
            Some(t) => {
                bounds.push(t);
                covered_until = Some(t);
            }
            None => {
                bounds.push(trajs[0].last_time() + 1);
                covered_until = None;
                break;
            }
        }
    }
    let windows = bounds.windows(2).map(|w| times.iter().filter(|&&t| t >= w[0] && t < w[1]).count() as u64).collect();
    let mut tooth_counts = Vec::new();
    for &(k, h) in teeth {
        tooth_counts.push(((k, h), z_kh_count(trajs, profile, k, h)?.0));
    }
    Ok(CollisionSummary { total: times.len() as u64, windows, covered_until, teeth: tooth_counts })
}

/// Writes every meeting as `n,x,y,kind`, where kind is `pair` or `triple`.
pub fn write_collision_csv<W: Write>(trajs: &[Trajectory], mut w: W) -> Result<()> {
    writeln!(w, "n,x,y,kind")?;
    for n in 0..trajs[0].path.len() {
        for i in 0..trajs.len() {
            for j in i + 1..trajs.len() {
                let v = trajs[i].path[n];
                if v != trajs[j].path[n] {
                    continue;
                }
                let all = all_meet(trajs, n);
                if all && trajs.len() == 3 {
                    if i == 0 && j == 1 {
                        writeln!(w, "{n},{},{},triple", v.x, v.y)?;
                    }
                } else {
                    writeln!(w, "{n},{},{},pair", v.x, v.y)?;
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_horizon_same_start() {
        let p = Profile::constant(1.0).unwrap();
        let r = run_pair(&p, [Vertex::new(0, 0); 2], 0, &StopSpec::default(), 3).unwrap();
        assert_eq!(r.collisions, vec![0]);
        assert_eq!(r.z_seq, vec![0]);
        assert_eq!(r.sigma, vec![0]);
    }

    #[test]
    fn odd_parity_never_meets() {
        let p = Profile::constant(2.0).unwrap();
        let r = run_pair(&p, [Vertex::new(0, 0), Vertex::new(1, 0)], 20_000, &StopSpec::default(), 9).unwrap();
        assert!(r.parity_warning);
        assert!(r.collisions.is_empty());
    }

    #[test]
    fn z_increments_unit() {
        let p = Profile::nlogn();
        let r = run_pair(&p, [Vertex::new(-4, 0), Vertex::new(4, 0)], 5000, &StopSpec::default(), 2).unwrap();
        assert_eq!(r.z_seq.len(), 2 * 5000 + 1);
        for w in r.z_jump_times.windows(2) {
            let d = r.z_seq[w[1] as usize] - r.z_seq[w[0] as usize];
            assert_eq!(d.abs(), 1);
        }
        for &s in &r.sigma[1..] {
            assert_eq!(r.a.path[s as usize].x, r.b.path[s as usize].x);
        }
    }

    #[test]
    fn psi_trivial_when_starting_together() {
        let p = Profile::constant(4.0).unwrap();
        let r = run_pair(&p, [Vertex::new(0, 0); 2], 10, &StopSpec::default(), 1).unwrap();
        assert_eq!(psi_event(&r, 0), Outcome::Yes);
    }

    #[test]
    fn tooth_count_needs_shared_column() {
        let p = Profile::constant(8.0).unwrap();
        let r = run_pair(&p, [Vertex::new(0, 0), Vertex::new(1, 2)], 10, &StopSpec::default(), 1).unwrap();
        assert!(tooth_collision_count(&r).is_err());
        let r = run_pair(&p, [Vertex::new(0, 0), Vertex::new(0, 0)], 10_000, &StopSpec::default(), 1).unwrap();
        assert!(tooth_collision_count(&r).unwrap().value >= 1);
    }

    #[test]
    fn z_kh_rejects_tall_h() {
        let p = Profile::constant(3.0).unwrap();
        let r = run_pair(&p, [Vertex::new(0, 0); 2], 100, &StopSpec::default(), 1).unwrap();
        let trajs = [r.a.clone(), r.b.clone()];
        assert!(z_kh_count(&trajs, &p, 0, 4).is_err());
        let (z, tilde) = z_kh_count(&trajs, &p, 0, 3).unwrap();
        assert!(tilde <= z);
    }

    #[test]
    fn spine_only_meetings_have_no_middle_third() {
        let p = Profile::constant(0.0).unwrap();
        let r = run_pair(&p, [Vertex::new(0, 0); 2], 1000, &StopSpec::default(), 6).unwrap();
        let trajs = [r.a, r.b];
        let (_, tilde) = z_kh_count(&trajs, &p, 0, 0).unwrap();
        assert_eq!(tilde, 0);
    }

    #[test]
    fn summary_windows_partition() {
        let p = Profile::constant(1.0).unwrap();
        let r = run_pair(&p, [Vertex::new(0, 0); 2], 200_000, &StopSpec::default(), 12).unwrap();
        let trajs = [r.a, r.b];
        let s = summarize(&trajs, &p, 2, 4, &[(0, 1)]).unwrap();
        let end = s.covered_until.unwrap_or(u64::MAX);
        let before = r.collisions.iter().filter(|&&t| t < end).count() as u64;
        assert_eq!(s.windows.iter().sum::<u64>(), before);
    }

    #[test]
    fn triple_from_common_start() {
        let p = Profile::constant(0.0).unwrap();
        let t = run_triple(&p, [Vertex::new(0, 0); 3], 100, 4, 8, 0).unwrap();
        assert_eq!(t.triple_collisions[0], 0);
        let mut buf = Vec::new();
        write_collision_csv(&t.trajs, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("n,x,y,kind\n0,0,0,triple\n"));
    }
}
