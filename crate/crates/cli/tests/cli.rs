use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn combwalk(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_combwalk"));
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const CONFIG: &str = r#"{"schema":1,"profile":{"family":"linlog","params":{"beta":1}},
"estimator":{"kind":"CollisionBeforeExit","n":4,"d":4},"replicas":300,"master_seed":5}"#;

#[test]
fn classify_families() {
    for (args, verdict) in [
        (vec!["--family", "constant", "--a", "3"], "InfiniteCollision"),
        (vec!["--family", "power", "--alpha", "0.5"], "InfiniteCollision"),
        (vec!["--family", "nlogn"], "InfiniteCollision"),
        (vec!["--family", "linlog", "--beta", "3"], "FiniteCollision"),
        (vec!["--family", "power", "--alpha", "2"], "Unknown"),
    ] {
        let mut all = vec!["classify"];
        all.extend(args.iter());
        let o = combwalk(&all, &[]);
        assert!(o.status.success());
        let out = stdout(&o);
        let row = out.lines().nth(1).unwrap();
        assert_eq!(row.split(',').nth(1), Some(verdict), "{row}");
    }
}

#[test]
fn classify_json_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "p.json", r#"{"family":"linlog","params":{"beta":3}}"#);
    let o = combwalk(&["classify", "--config", &path, "--format", "json"], &[]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["verdict"], "FiniteCollision");
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let zero = write(dir.path(), "zero.json", &CONFIG.replace("300", "0"));
    let broken = write(dir.path(), "broken.json", "{\"schema\": 1,");
    let unknown = write(dir.path(), "unknown.json", &CONFIG.replace("\"master_seed\"", "\"extra\":1,\"master_seed\""));
    for args in [
        vec!["estimate", "--config", zero.as_str()],
        vec!["estimate", "--config", broken.as_str()],
        vec!["estimate", "--config", unknown.as_str()],
        vec!["acceptance", "medium"],
        vec!["classify", "--family", "power", "--alpha", "-1"],
    ] {
        let o = combwalk(&args, &[]);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn estimate_is_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", CONFIG);
    let mut outs = Vec::new();
    for threads in ["1", "2", "4"] {
        let out = dir.path().join(format!("e{threads}.csv"));
        let o = combwalk(&["estimate", "--config", &cfg, "--out", out.to_str().unwrap()], &[("COMBWALK_THREADS", threads)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outs.push(fs::read(out).unwrap());
    }
    assert_eq!(outs[0], outs[1]);
    assert_eq!(outs[0], outs[2]);
    let o = combwalk(&["estimate", "--config", &cfg, "--threads", "3"], &[]);
    assert_eq!(o.stdout, outs[0]);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", CONFIG);
    let a = stdout(&combwalk(&["estimate", "--config", &cfg, "--seed", "9"], &[]));
    let b = stdout(&combwalk(&["estimate", "--config", &cfg], &[]));
    let row = |s: &str| s.lines().nth(1).unwrap().to_string();
    assert!(row(&a).contains(",9,"));
    // Same experiment, same fingerprint.
    assert_eq!(row(&a).rsplit(',').next(), row(&b).rsplit(',').next());
}

#[test]
fn sweep_reports_invalid_points() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(r#"{{"template": {CONFIG}, "grid": [{{"estimator": {{"kind": "CollisionBeforeExit", "n": 2, "d": 4}}}}, {{"replicas": 0}}]}}"#);
    let cfg = write(dir.path(), "s.json", &text);
    let o = combwalk(&["sweep", "--config", &cfg], &[]);
    assert!(o.status.success());
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("CollisionBeforeExit,"));
    assert!(rows[2].starts_with("ERROR,"));
}

#[test]
fn exact_gambler_ruin_rational() {
    let o = combwalk(&["exact", "gambler-ruin", "--v", "3", "--rational"], &[]);
    assert!(o.status.success());
    assert!(stdout(&o).lines().nth(1).unwrap().contains(",1/6,rational"));
}

#[test]
fn simulate_writes_trajectory() {
    let o = combwalk(&["simulate", "--family", "constant", "--a", "2", "--start=-1,0", "--horizon", "50", "--seed", "4"], &[]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(out.lines().next(), Some("n,x,y"));
    assert_eq!(out.lines().count(), 52);
    assert_eq!(out.lines().nth(1), Some("0,-1,0"));
}

#[test]
fn acceptance_subset_passes() {
    let o = combwalk(&["acceptance", "fast", "--only", "1", "--only", "6"], &[]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("PASS")).count(), 2);
}
