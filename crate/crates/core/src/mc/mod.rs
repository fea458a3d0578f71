//! Deterministic parallel Monte Carlo over independent replicas.

pub mod replica;
pub mod stats;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{arg, Error, Result};
use crate::profile::Profile;
use crate::rng::derive_seed;

pub use replica::{run_replica, Sample};

pub const SCHEMA: u32 = 1;
pub const DEFAULT_HORIZON: u64 = 1_000_000;
pub const THREADS_ENV: &str = "COMBWALK_THREADS";

fn default_ci() -> f64 {
    0.95
}

fn default_q() -> f64 {
    0.5
}

/// The quantity estimated, one replica at a time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum EstimatorSpec {
    /// `P_{(0,1)}(hit (0, 2v) before (0, 0))`.
    GamblerRuin { v: i64 },
    /// `P(Psi_0)` from `(u, 0)` and `(u, v)`. `l` is only used by the oracle.
    PsiZero {
        u: i64,
        v: i64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        l: Option<u64>,
    },
    /// Mean of `H` from `(u, 0)` and `(u, v)`.
    ToothH {
        u: i64,
        v: i64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        h: Option<i64>,
    },
    /// `P(meet before theta_{dN})` from `(-N, 0)` and `(N, 0)`.
    CollisionBeforeExit { n: u64, d: u64 },
    /// `P(sigma_N >= theta_{dN} ^ theta'_{dN})` from `(-N, 0)` and `(N, 0)`.
    SigmaRace { n: u64, d: u64 },
    /// `P(triple meeting before Theta)` from `(-N, 0)`, `(N mod 2, 0)`, `(N, 0)`.
    TripleBeforeExit { n: u64, d: u64 },
    /// Mean of `Z_{k,h}` for two walkers from the origin; `h` defaults to
    /// the tooth height at `k`.
    ZkhMean {
        k: i64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        h: Option<i64>,
    },
    /// Quantile `q` of `xi(0, N^2)` for the embedded walk.
    LocalTimeQuantile {
        n: u64,
        #[serde(default = "default_q")]
        q: f64,
    },
    /// Mean fraction of windows `Upsilon_1..Upsilon_{m_max}` containing a
    /// meeting, for two walkers from the origin.
    UpsilonWindows { d: u64, m_max: u32 },
}

impl EstimatorSpec {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorSpec::GamblerRuin { .. } => "GamblerRuin",
            EstimatorSpec::PsiZero { .. } => "PsiZero",
            EstimatorSpec::ToothH { .. } => "ToothH",
            EstimatorSpec::CollisionBeforeExit { .. } => "CollisionBeforeExit",
            EstimatorSpec::SigmaRace { .. } => "SigmaRace",
            EstimatorSpec::TripleBeforeExit { .. } => "TripleBeforeExit",
            EstimatorSpec::ZkhMean { .. } => "ZkhMean",
            EstimatorSpec::LocalTimeQuantile { .. } => "LocalTimeQuantile",
            EstimatorSpec::UpsilonWindows { .. } => "UpsilonWindows",
        }
    }

    /// Parameters as canonical JSON, without the kind tag.
    pub fn params_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("spec serialises");
        if let Value::Object(m) = &mut v {
            m.remove("kind");
        }
        v.to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub profile: Profile,
    pub estimator: EstimatorSpec,
    pub replicas: u64,
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_ci")]
    pub ci_level: f64,
}

fn default_horizon() -> u64 {
    DEFAULT_HORIZON
}

impl ExperimentConfig {
    pub fn new(profile: Profile, estimator: EstimatorSpec, replicas: u64, horizon: u64, master_seed: u64) -> Self {
        Self { schema: SCHEMA, profile, estimator, replicas, horizon, master_seed, ci_level: 0.95 }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA {
            return Err(Error::Config(format!("unsupported schema {}", self.schema)));
        }
        if self.replicas == 0 {
            return arg("replicas must be positive");
        }
        if self.horizon == 0 {
            return arg("horizon must be positive");
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(Error::Config(format!("ci_level {} outside (0, 1)", self.ci_level)));
        }
        replica::validate(&self.estimator, &self.profile)
    }

    /// SHA-256 of the canonical config JSON without the master seed, first
    /// 16 hex digits. Identifies the experiment independent of the seed.
    pub fn fingerprint(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serialises");
        if let Value::Object(m) = &mut v {
            m.remove("master_seed");
        }
        let digest = Sha256::digest(v.to_string().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    fn fingerprint_u64(&self) -> u64 {
        u64::from_str_radix(&self.fingerprint(), 16).expect("hex fingerprint")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimateKind {
    Probability,
    Mean,
    Quantile,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub estimator: String,
    pub params: String,
    pub point: f64,
    pub stderr: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Replicas run, including censored ones.
    pub replicas: u64,
    pub censored: u64,
    pub master_seed: u64,
    pub fingerprint: String,
    pub kind: EstimateKind,
}

pub const CSV_HEADER: &str = "estimator,params,point,stderr,ci_lo,ci_hi,replicas,censored,master_seed,fingerprint";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl Estimate {
    pub fn censored_fraction(&self) -> f64 {
        self.censored as f64 / self.replicas as f64
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.estimator,
            csv_field(&self.params),
            self.point,
            self.stderr,
            self.ci_lo,
            self.ci_hi,
            self.replicas,
            self.censored,
            self.master_seed,
            self.fingerprint
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("estimate serialises")
    }
}

/// Aggregates replica samples in index order.
pub fn aggregate(cfg: &ExperimentConfig, samples: &[Sample]) -> Result<Estimate> {
    let z = stats::z_value(cfg.ci_level);
    let censored = samples.iter().filter(|s| matches!(s, Sample::Censored)).count() as u64;
    let used = samples.len() as u64 - censored;
    if used == 0 {
        return Err(Error::Estimation(format!(
            "all {} replicas censored at horizon {} ({})",
            samples.len(),
            cfg.horizon,
            cfg.estimator.name()
        )));
    }
    let hits: Vec<bool> = samples.iter().filter_map(|s| if let Sample::Hit(b) = s { Some(*b) } else { None }).collect();
    let values: Vec<f64> = samples.iter().filter_map(|s| if let Sample::Value(v) = s { Some(*v) } else { None }).collect();
    let (kind, point, stderr, lo, hi) = if !hits.is_empty() {
        let k = hits.iter().filter(|b| **b).count() as u64;
        let p = k as f64 / used as f64;
        let (lo, hi) = stats::wilson(k, used, z);
        (EstimateKind::Probability, p, (p * (1.0 - p) / used as f64).sqrt(), lo, hi)
    } else if let EstimatorSpec::LocalTimeQuantile { q, .. } = cfg.estimator {
        let (p, lo, hi) = stats::quantile_ci(&values, q, z);
        (EstimateKind::Quantile, p, (hi - lo) / (2.0 * z), lo, hi)
    } else {
        let (m, se) = stats::mean_se(&values);
        (EstimateKind::Mean, m, se, m - z * se, m + z * se)
    };
    Ok(Estimate {
        estimator: cfg.estimator.name().to_string(),
        params: cfg.estimator.params_json(),
        point,
        stderr,
        ci_lo: lo,
        ci_hi: hi,
        replicas: samples.len() as u64,
        censored,
        master_seed: cfg.master_seed,
        fingerprint: cfg.fingerprint(),
        kind,
    })
}

/// Replica samples in index order; replica `i` is seeded with
/// `derive_seed(master_seed, i)`.
pub fn run_samples(cfg: &ExperimentConfig) -> Result<Vec<Sample>> {
    cfg.validate()?;
    (0..cfg.replicas)
        .into_par_iter()
        .map(|i| run_replica(&cfg.estimator, &cfg.profile, cfg.horizon, derive_seed(cfg.master_seed, i)))
        .collect()
}

/// Runs the experiment on the current rayon pool.
pub fn run_estimator(cfg: &ExperimentConfig) -> Result<Estimate> {
    aggregate(cfg, &run_samples(cfg)?)
}

/// Worker count from `COMBWALK_THREADS`, if set and valid.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV).ok().and_then(|s| s.trim().parse().ok()).filter(|&n| n > 0)
}

/// Runs `f` on a dedicated pool of `threads` workers (default: env, then
/// all cores).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads.or_else(threads_from_env) {
        b = b.num_threads(n);
    }
    let pool = b.build().map_err(|e| Error::Resource(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// One row of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub enum SweepRow {
    Ok(Estimate),
    Invalid { point: Value, error: String },
}

impl SweepRow {
    pub fn csv_row(&self) -> String {
        match self {
            SweepRow::Ok(e) => e.csv_row(),
            SweepRow::Invalid { point, error } => {
                format!("ERROR,{},,,,,,,,{}", csv_field(&point.to_string()), csv_field(error))
            }
        }
    }
}

fn merge(into: &mut Value, patch: &Value) {
    match (into, patch) {
        (Value::Object(a), Value::Object(b)) => {
            for (k, v) in b {
                merge(a.entry(k.clone()).or_insert(Value::Null), v);
            }
        }
        (slot, v) => *slot = v.clone(),
    }
}

/// Runs the template once per grid point. Each point is a JSON object
/// merged into the template; its master seed is the template seed
/// namespaced by the point's fingerprint.
pub fn sweep(template: &ExperimentConfig, grid: &[Value]) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return arg("sweep grid is empty");
    }
    let base = serde_json::to_value(template)?;
    let mut rows = Vec::with_capacity(grid.len());
    for point in grid {
        let mut v = base.clone();
        merge(&mut v, point);
        let row = serde_json::from_value::<ExperimentConfig>(v)
            .map_err(|e| Error::Config(e.to_string()))
            .and_then(|mut cfg| {
                cfg.validate()?;
                cfg.master_seed = derive_seed(template.master_seed, cfg.fingerprint_u64());
                run_estimator(&cfg)
            });
        rows.push(match row {
            Ok(e) => SweepRow::Ok(e),
            Err(e) => SweepRow::Invalid { point: point.clone(), error: e.to_string() },
        });
    }
    Ok(rows)
}

pub fn write_csv<W: Write>(mut w: W, rows: &[String]) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(w, "{r}")?;
    }
    Ok(())
}
