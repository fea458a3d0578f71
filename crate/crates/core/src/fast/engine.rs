//! Event-driven simulation of several independent walkers.
//!
//! Tooth excursions and in-tooth blocks are sampled as whole segments from
//! exact first-passage laws. A walker inside a segment has an unknown
//! position confined to a known range; ranges of walkers sharing a column
//! are kept disjoint, so every meeting happens while both positions are
//! known. When a neighbour needs the position, it is drawn from the law of
//! the segment conditioned only on not having ended yet.

use crate::error::Result;
use crate::profile::{HeightCache, Profile, Vertex};
use crate::rng::RngStream;

use super::kernel::sample_killed;
use super::tables::{Draw, FastTables};

#[derive(Clone, Copy, Debug)]
enum ExcEnd {
    Return,
    Meander,
    Killed,
}

#[derive(Clone, Copy, Debug)]
enum BlockEnd {
    Exit(i64),
    Killed,
}

#[derive(Clone, Copy, Debug)]
enum Seg {
    Idle,
    Excursion { sign: i64, h: i64, t0: u64, end: u64, fin: ExcEnd },
    Block { center: i64, m: i64, t0: u64, end: u64, fin: BlockEnd },
    /// Block of half-width `m` started at the tip `sign * h`; the walk is
    /// reflected there, so it ends at `sign * (h - m)`.
    Tip { sign: i64, h: i64, m: i64, t0: u64, end: u64, killed: bool },
}

struct Walker {
    col: i64,
    y: i64,
    /// Time at which `(col, y)` holds when idle.
    t: u64,
    seg: Seg,
    moved: bool,
    rng: RngStream,
}

impl Walker {
    fn event_time(&self) -> u64 {
        match self.seg {
            Seg::Idle => self.t,
            Seg::Excursion { end, .. } | Seg::Block { end, .. } | Seg::Tip { end, .. } => end,
        }
    }

    fn pending(&self, now: u64) -> bool {
        matches!(self.seg, Seg::Idle) && self.t == now
    }

    /// Closed range of heights this walker may occupy while others decide.
    fn reserved(&self, now: u64) -> (i64, i64) {
        match self.seg {
            Seg::Idle if self.t == now => (self.y - 1, self.y + 1),
            Seg::Idle => (self.y, self.y),
            Seg::Excursion { sign, h, .. } => {
                if sign > 0 {
                    (1, h)
                } else {
                    (-h, -1)
                }
            }
            Seg::Block { center, m, .. } => (center - m, center + m),
            Seg::Tip { sign, h, m, .. } => {
                if sign > 0 {
                    (h - m, h)
                } else {
                    (-h, m - h)
                }
            }
        }
    }

    /// Heights possible strictly inside the current segment.
    fn interior_contains(&self, y: i64) -> bool {
        match self.seg {
            Seg::Idle => false,
            Seg::Excursion { sign, h, .. } => y * sign >= 1 && y * sign <= h,
            Seg::Block { center, m, .. } => (y - center).abs() < m,
            Seg::Tip { sign, h, m, .. } => y * sign > h - m && y * sign <= h,
        }
    }
}

/// What an observer sees of one walker at an event time.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WalkerView {
    pub col: i64,
    /// Exact position, when known at this time.
    pub pos: Option<Vertex>,
    /// Arrived at this time by a horizontal move.
    pub moved: bool,
}

/// Receives the state at every event time; returns `true` to stop.
///
/// Any time two walkers share a vertex, both positions are exact at that
/// time and it is an event time.
pub trait Observer {
    fn observe(&mut self, now: u64, walkers: &[WalkerView]) -> bool;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunEnd {
    Stopped(u64),
    Horizon,
}

pub struct FastEngine<'a> {
    tables: &'a FastTables,
    cache: HeightCache<'a>,
    walkers: Vec<Walker>,
    views: Vec<WalkerView>,
}

impl<'a> FastEngine<'a> {
    /// Walker `j` uses stream `child(master_seed, j)`.
    pub fn new(profile: &'a Profile, tables: &'a FastTables, starts: &[Vertex], master_seed: u64) -> Result<Self> {
        for s in starts {
            profile.check_vertex(*s)?;
        }
        let walkers: Vec<Walker> = starts
            .iter()
            .enumerate()
            .map(|(j, s)| Walker {
                col: s.x,
                y: s.y,
                t: 0,
                seg: Seg::Idle,
                moved: false,
                rng: RngStream::child(master_seed, j as u64),
            })
            .collect();
        let views = starts.iter().map(|s| WalkerView { col: s.x, pos: Some(*s), moved: false }).collect();
        Ok(Self { tables, cache: HeightCache::new(profile), walkers, views })
    }

    pub fn run<O: Observer>(&mut self, horizon: u64, obs: &mut O) -> RunEnd {
        if obs.observe(0, &self.views) {
            return RunEnd::Stopped(0);
        }
        loop {
            let now = self.walkers.iter().map(Walker::event_time).min().expect("at least one walker");
            if now > horizon {
                return RunEnd::Horizon;
            }
            for i in 0..self.walkers.len() {
                if !matches!(self.walkers[i].seg, Seg::Idle) && self.walkers[i].event_time() == now {
                    self.finish(i, now);
                }
            }
            for (v, w) in self.views.iter_mut().zip(&self.walkers) {
                let exact = w.pending(now);
                *v = WalkerView { col: w.col, pos: exact.then(|| Vertex::new(w.col, w.y)), moved: exact && w.moved };
            }
            if obs.observe(now, &self.views) {
                return RunEnd::Stopped(now);
            }
            while let Some(i) = self.walkers.iter().position(|w| w.pending(now)) {
                self.decide(i, now);
            }
        }
    }

    fn finish(&mut self, i: usize, now: u64) {
        let w = &mut self.walkers[i];
        w.y = match w.seg {
            Seg::Idle => w.y,
            Seg::Excursion { sign, h, t0, fin, .. } => match fin {
                ExcEnd::Return => 0,
                ExcEnd::Meander => {
                    let cdf = self.tables.meander(now - t0);
                    let u = w.rng.uniform();
                    let z = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1) as i64 + 1;
                    sign * z
                }
                ExcEnd::Killed => sign * fold(sample_killed(2 * h, 1, now - t0 - 1, &mut w.rng), h),
            },
            Seg::Block { center, m, t0, fin, .. } => match fin {
                BlockEnd::Exit(side) => center + side * m,
                BlockEnd::Killed => center - m + sample_killed(2 * m, m, now - t0, &mut w.rng),
            },
            Seg::Tip { sign, h, m, t0, killed, .. } => {
                if killed {
                    sign * (h - (sample_killed(2 * m, m, now - t0, &mut w.rng) - m).abs())
                } else {
                    sign * (h - m)
                }
            }
        };
        w.seg = Seg::Idle;
        w.t = now;
        w.moved = false;
    }

    /// Draws the position of a walker in mid-segment given only that the
    /// segment has not ended by `now`.
    fn resolve(&mut self, j: usize, now: u64) {
        let w = &mut self.walkers[j];
        w.y = match w.seg {
            Seg::Idle => return,
            Seg::Excursion { sign, h, t0, .. } => {
                let k = now - t0;
                if k == 0 {
                    0
                } else {
                    sign * fold(sample_killed(2 * h, 1, k - 1, &mut w.rng), h)
                }
            }
            Seg::Block { center, m, t0, .. } => center - m + sample_killed(2 * m, m, now - t0, &mut w.rng),
            Seg::Tip { sign, h, m, t0, .. } => sign * (h - (sample_killed(2 * m, m, now - t0, &mut w.rng) - m).abs()),
        };
        w.seg = Seg::Idle;
        w.t = now;
        w.moved = false;
    }

    fn unit(&mut self, i: usize, target: i64, now: u64) {
        let col = self.walkers[i].col;
        for j in 0..self.walkers.len() {
            if j != i && self.walkers[j].col == col && self.walkers[j].interior_contains(target) {
                self.resolve(j, now);
            }
        }
        let w = &mut self.walkers[i];
        w.y = target;
        w.t = now + 1;
        w.moved = false;
    }

    fn decide(&mut self, i: usize, now: u64) {
        let (col, y) = (self.walkers[i].col, self.walkers[i].y);
        let h = self.cache.get(col);
        if y == 0 {
            let deg = if h >= 1 { 4 } else { 2 };
            let w = &mut self.walkers[i];
            match w.rng.below(deg) {
                d @ (0 | 1) => {
                    w.col += if d == 0 { -1 } else { 1 };
                    w.t = now + 1;
                    w.moved = true;
                }
                d => {
                    let sign = if d == 2 { 1 } else { -1 };
                    let (lo, hi) = if sign > 0 { (1, h) } else { (-h, -1) };
                    if self.clear(i, lo, hi, now) {
                        self.start_excursion(i, sign, h, now);
                    } else {
                        self.unit(i, sign, now);
                    }
                }
            }
            return;
        }
        let (s, z) = (y.signum(), y.abs());
        if z >= h {
            let cap = self.room(i, y, h.min(self.tables.cfg.m_max), now);
            if cap < 2 {
                self.unit(i, y - s, now);
                return;
            }
            let m = 1i64 << (63 - cap.leading_zeros());
            let w = &mut self.walkers[i];
            let (end, killed) = match self.tables.block(m).sample(w.rng.uniform()) {
                Draw::At(t) => (now + t, false),
                Draw::Beyond(t) => (now + t, true),
            };
            w.seg = Seg::Tip { sign: s, h, m, t0: now, end, killed };
            return;
        }
        let cap = self.room(i, y, z.min(h - z).min(self.tables.cfg.m_max), now);
        if cap >= 2 {
            let m = 1i64 << (63 - cap.leading_zeros());
            let w = &mut self.walkers[i];
            let u = w.rng.uniform();
            let (end, fin) = match self.tables.block(m).sample(u) {
                Draw::At(t) => (now + t, BlockEnd::Exit(if w.rng.coin() { 1 } else { -1 })),
                Draw::Beyond(t) => (now + t, BlockEnd::Killed),
            };
            w.seg = Seg::Block { center: y, m, t0: now, end, fin };
        } else {
            let target = if self.walkers[i].rng.coin() { y + 1 } else { y - 1 };
            self.unit(i, target, now);
        }
    }

    /// Largest `m <= cap` with `[y - m, y + m]` clear of every other
    /// walker's reserved range in this column; 0 if `y` itself is taken.
    fn room(&self, i: usize, y: i64, mut cap: i64, now: u64) -> i64 {
        let col = self.walkers[i].col;
        for (j, o) in self.walkers.iter().enumerate() {
            if j == i || o.col != col || cap < 2 {
                continue;
            }
            let (lo, hi) = o.reserved(now);
            cap = if lo > y {
                cap.min(lo - y - 1)
            } else if hi < y {
                cap.min(y - hi - 1)
            } else {
                0
            };
        }
        cap
    }

    /// No other walker in this column reserves a height in `[lo, hi]`.
    fn clear(&self, i: usize, lo: i64, hi: i64, now: u64) -> bool {
        let col = self.walkers[i].col;
        self.walkers.iter().enumerate().all(|(j, o)| {
            if j == i || o.col != col {
                return true;
            }
            let (a, b) = o.reserved(now);
            b < lo || a > hi
        })
    }

    fn start_excursion(&mut self, i: usize, sign: i64, h: i64, now: u64) {
        let tables = self.tables;
        let w = &mut self.walkers[i];
        let u = w.rng.uniform();
        let (end, fin) = if h <= tables.cfg.h_small {
            match tables.small(h).sample(u) {
                Draw::At(e) => (now + e, ExcEnd::Return),
                Draw::Beyond(k) => (now + k, ExcEnd::Killed),
            }
        } else {
            let k0 = tables.k0(h);
            match tables.halfline().sample(u) {
                Draw::At(e) if e <= k0 => (now + e, ExcEnd::Return),
                _ => (now + k0, ExcEnd::Meander),
            }
        };
        w.seg = Seg::Excursion { sign, h, t0: now, end, fin };
    }
}

/// Maps a position of the walk on `(0, 2h)` to the tooth `[0, h]`.
fn fold(p: i64, h: i64) -> i64 {
    if p > h {
        2 * h - p
    } else {
        p
    }
}

/// Convenience wrapper: builds an engine and runs it.
pub fn run_fast<O: Observer>(
    profile: &Profile,
    tables: &FastTables,
    starts: &[Vertex],
    master_seed: u64,
    horizon: u64,
    obs: &mut O,
) -> Result<RunEnd> {
    Ok(FastEngine::new(profile, tables, starts, master_seed)?.run(horizon, obs))
}
