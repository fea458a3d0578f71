use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{Context, Result};
use serde::Deserialize;
use serde_json::{json, Value};

use combwalk::acceptance::{self, Suite};
use combwalk::collision::{run_group, write_collision_csv};
use combwalk::mc::{self, ExperimentConfig, SweepRow};
use combwalk::oracle::{self, Mode, OracleRecord};
use combwalk::walk::StopSpec;
use combwalk::{Error, Profile, Vertex};

use crate::{ExactCmd, FamilyArg, Format, ProfileArgs, SimulateArgs};

pub struct Ctx {
    pub out: Option<PathBuf>,
    pub format: Format,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

/// Bad input: maps to exit code 2.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

/// A statistical failure: maps to exit code 3.
#[derive(Debug)]
pub struct Statistical(pub String);

impl fmt::Display for Statistical {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Statistical {}

pub enum Failure {
    Usage,
    Statistical,
    Other,
}

impl Failure {
    pub fn of(e: &anyhow::Error) -> Self {
        for cause in e.chain() {
            if cause.is::<Usage>() {
                return Failure::Usage;
            }
            if cause.is::<Statistical>() {
                return Failure::Statistical;
            }
            if let Some(err) = cause.downcast_ref::<Error>() {
                return match err {
                    Error::Config(_) | Error::Json(_) | Error::Argument(_) | Error::InvalidVertex { .. } => Failure::Usage,
                    Error::Estimation(_) => Failure::Statistical,
                    _ => Failure::Other,
                };
            }
        }
        Failure::Other
    }
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

#[derive(Clone, Copy, Debug)]
pub struct StartArg(pub Vertex);

impl FromStr for StartArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (x, y) = s.split_once(',').ok_or_else(|| format!("expected x,y, got {s:?}"))?;
        let parse = |t: &str| t.trim().parse::<i64>().map_err(|e| format!("{t:?}: {e}"));
        Ok(StartArg(Vertex::new(parse(x)?, parse(y)?)))
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(|e| usage(format!("{e:#}")))
}

fn profile_of(p: &ProfileArgs) -> Result<Profile> {
    if let Some(path) = &p.config {
        return Ok(Profile::from_json(&read(path)?)?);
    }
    let need = |v: Option<f64>, name: &str| v.ok_or_else(|| usage(format!("--{name} is required for this family")));
    let profile = match p.family {
        None => return Err(usage("give a profile with --config <file> or --family")),
        Some(FamilyArg::Constant) => Profile::constant(need(p.a, "a")?)?,
        Some(FamilyArg::Power) => Profile::power(need(p.alpha, "alpha")?)?,
        Some(FamilyArg::Linlog) => Profile::linlog(need(p.beta, "beta")?)?,
        Some(FamilyArg::Nlogn) => Profile::nlogn(),
    };
    Ok(profile)
}

fn sink(ctx: &Ctx) -> Result<Box<dyn Write>> {
    Ok(match &ctx.out {
        Some(path) => {
            let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            Box::new(BufWriter::new(f))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn csv_quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn classify(ctx: &Ctx, p: &ProfileArgs) -> Result<()> {
    let profile = profile_of(p)?;
    let c = profile.classify();
    let sums = [1_000u64, 1_000_000].map(|n| (n, profile.reciprocal_partial_sum(n)));
    let verdicts: Vec<String> = c.verdicts.iter().map(|v| v.to_string()).collect();
    let mut w = sink(ctx)?;
    match ctx.format {
        Format::Json => {
            let v = json!({
                "profile": serde_json::to_value(&profile)?,
                "verdict": verdicts[0],
                "verdicts": verdicts,
                "witness": c.witness,
                "reciprocal_partial_sums": sums.iter().map(|(n, s)| json!({"n": n, "sum": s})).collect::<Vec<_>>(),
            });
            writeln!(w, "{v}")?;
        }
        Format::Csv => {
            writeln!(w, "profile,verdict,verdicts,witness,partial_sum_1e3,partial_sum_1e6")?;
            writeln!(
                w,
                "{},{},{},{},{},{}",
                csv_quote(&profile.to_string()),
                verdicts[0],
                verdicts.join(";"),
                csv_quote(&c.witness),
                sums[0].1,
                sums[1].1
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn simulate(ctx: &Ctx, s: &SimulateArgs) -> Result<()> {
    let profile = profile_of(&s.profile)?;
    let starts: Vec<Vertex> = if s.starts.is_empty() { vec![Vertex::new(0, 0)] } else { s.starts.iter().map(|a| a.0).collect() };
    let horizon = s.horizon.ok_or_else(|| usage("--horizon is required"))?;
    if horizon == 0 {
        return Err(usage("horizon must be positive"));
    }
    let seed = ctx.seed.unwrap_or(0);
    let (trajs, _) = run_group(&profile, &starts, horizon, &StopSpec::default(), seed)?;
    let mut w = sink(ctx)?;
    match ctx.format {
        Format::Json => {
            let meetings: Vec<u64> = (0..trajs[0].path.len())
                .filter(|&n| trajs[1..].iter().all(|t| t.path[n] == trajs[0].path[n]) && trajs.len() > 1)
                .map(|n| n as u64)
                .collect();
            let paths: Vec<Vec<[i64; 2]>> =
                trajs.iter().map(|t| t.path.iter().map(|v| [v.x, v.y]).collect()).collect();
            let v = json!({
                "profile": serde_json::to_value(&profile)?,
                "master_seed": seed,
                "horizon": horizon,
                "trajectories": paths,
                "meetings": meetings,
            });
            writeln!(w, "{v}")?;
        }
        Format::Csv if trajs.len() == 1 => trajs[0].write_csv(&mut w)?,
        Format::Csv => write_collision_csv(&trajs, &mut w)?,
    }
    w.flush()?;
    Ok(())
}

pub fn exact(ctx: &Ctx, q: &ExactCmd) -> Result<()> {
    let mode = |r: bool| if r { Mode::Rational } else { Mode::Float };
    let records = match q {
        ExactCmd::GamblerRuin { v, rational } => {
            let p = oracle::absorption_probability(1, 2 * v, mode(*rational))?;
            vec![OracleRecord::exact("gambler_ruin", json!({"v": v}), &p)]
        }
        ExactCmd::ToothH { h, v, rational } => {
            let e = oracle::expected_tooth_collisions(*h, *v, mode(*rational))?;
            vec![OracleRecord::exact("expected_tooth_collisions", json!({"h": h, "v": v}), &e)]
        }
        ExactCmd::Psi0 { profile, u, v, l } => {
            let p = profile_of(profile)?;
            let b = oracle::psi0_probability_bracket(&p, *u, *v, *l)?;
            vec![OracleRecord::bracket("psi0_probability", json!({"profile": p, "u": u, "v": v, "l": l}), b)]
        }
        ExactCmd::CollisionBeforeExit { profile, starts, radius } => {
            let [a, b] = starts.as_slice() else {
                return Err(usage("give exactly two --start vertices"));
            };
            let p = profile_of(profile)?;
            let value = oracle::collision_before_exit(&p, [a.0, b.0], *radius)?;
            let params = json!({"profile": p, "starts": [[a.0.x, a.0.y], [b.0.x, b.0.y]], "radius": radius});
            vec![OracleRecord::scalar("collision_before_exit", params, json!(value))]
        }
        ExactCmd::ReturnProbabilities { profile, x, n_max } => {
            let p = profile_of(profile)?;
            let qs = oracle::return_probabilities(&p, *x, *n_max)?;
            qs.iter()
                .enumerate()
                .map(|(n, q)| OracleRecord::scalar("return_probability", json!({"profile": p, "x": x, "n": n}), json!(q)))
                .collect()
        }
        ExactCmd::KernelDecay { beta, n } => vec![oracle::kernel_decay_check(*beta, *n)?.into()],
    };
    let mut w = sink(ctx)?;
    match ctx.format {
        Format::Json => {
            for r in &records {
                writeln!(w, "{}", serde_json::to_string(r)?)?;
            }
        }
        Format::Csv => {
            writeln!(w, "quantity,params,value,mode")?;
            for r in &records {
                let mode = serde_json::to_value(r.mode)?;
                let value = match &r.value {
                    serde_json::Value::String(v) => v.clone(),
                    v => v.to_string(),
                };
                writeln!(
                    w,
                    "{},{},{},{}",
                    r.quantity,
                    csv_quote(&r.params.to_string()),
                    csv_quote(&value),
                    mode.as_str().unwrap_or_default()
                )?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn load_config(ctx: &Ctx, path: &Path) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_json(&read(path)?)?;
    if let Some(s) = ctx.seed {
        cfg.master_seed = s;
    }
    Ok(cfg)
}

pub fn estimate(ctx: &Ctx, path: &Path) -> Result<()> {
    let cfg = load_config(ctx, path)?;
    let e = mc::with_threads(ctx.threads, || mc::run_estimator(&cfg))??;
    if e.censored > 0 {
        eprintln!("warning: {} of {} replicas censored at horizon {}", e.censored, e.replicas, cfg.horizon);
    }
    let mut w = sink(ctx)?;
    match ctx.format {
        Format::Csv => mc::write_csv(&mut w, &[e.csv_row()])?,
        Format::Json => writeln!(w, "{}", e.to_json())?,
    }
    w.flush()?;
    drop(w);
    if ctx.out.is_some() {
        println!("fingerprint {}", e.fingerprint);
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepConfig {
    template: Value,
    grid: Vec<Value>,
}

pub fn sweep(ctx: &Ctx, path: &Path) -> Result<()> {
    let sc: SweepConfig = serde_json::from_str(&read(path)?).map_err(|e| usage(format!("sweep config: {e}")))?;
    let mut template = ExperimentConfig::from_json(&sc.template.to_string())?;
    if let Some(s) = ctx.seed {
        template.master_seed = s;
    }
    let rows = mc::with_threads(ctx.threads, || mc::sweep(&template, &sc.grid))??;
    let bad = rows.iter().filter(|r| matches!(r, SweepRow::Invalid { .. })).count();
    if bad > 0 {
        eprintln!("warning: {bad} of {} grid points invalid", rows.len());
    }
    let mut w = sink(ctx)?;
    match ctx.format {
        Format::Csv => mc::write_csv(&mut w, &rows.iter().map(SweepRow::csv_row).collect::<Vec<_>>())?,
        Format::Json => {
            for r in &rows {
                let line = match r {
                    SweepRow::Ok(e) => e.to_json(),
                    SweepRow::Invalid { point, error } => json!({"point": point, "error": error}).to_string(),
                };
                writeln!(w, "{line}")?;
            }
        }
    }
    w.flush()?;
    if bad == rows.len() {
        return Err(usage("every grid point was invalid"));
    }
    Ok(())
}

pub fn acceptance(ctx: &Ctx, suite: &str, only: &[u8]) -> Result<()> {
    let suite: Suite = suite.parse().map_err(|e: Error| usage(e.to_string()))?;
    let ids: Vec<u8> = if only.is_empty() { (1..=acceptance::CRITERIA).collect() } else { only.to_vec() };
    let mut w = sink(ctx)?;
    let mut failed = 0;
    for id in &ids {
        let report = acceptance::run_criterion(*id, suite).map_err(|e| usage(e.to_string()))?;
        failed += usize::from(!report.passed);
        match ctx.format {
            Format::Json => writeln!(w, "{}", serde_json::to_string(&report)?)?,
            Format::Csv => writeln!(w, "{report}")?,
        }
        w.flush()?;
    }
    if failed > 0 {
        return Err(Statistical(format!("{failed} of {} criteria failed", ids.len())).into());
    }
    Ok(())
}
