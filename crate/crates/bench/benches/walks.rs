use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use combwalk::fast::FastTables;
use combwalk::mc::{run_estimator, with_threads};
use combwalk::oracle::{absorption_probability, comb_chain, expected_tooth_collisions, Mode};
use combwalk::walk::{simulate, StopSpec};
use combwalk::{Profile, RngStream, Vertex};
use combwalk_bench::{collision_config, profiles};

fn step_engine(c: &mut Criterion) {
    let mut g = c.benchmark_group("step_engine");
    let horizon = 100_000u64;
    g.throughput(Throughput::Elements(horizon));
    for (name, p) in profiles() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &p, |b, p| {
            let mut seed = 0;
            b.iter(|| {
                seed += 1;
                let mut rng = RngStream::new(seed);
                simulate(p, Vertex::spine(0), horizon, &StopSpec::default(), &mut rng).unwrap()
            })
        });
    }
    g.finish();
}

fn collision_replicas(c: &mut Criterion) {
    let mut g = c.benchmark_group("collision_before_exit");
    g.sample_size(10);
    FastTables::standard();
    for (name, p) in profiles() {
        for n in [16u64, 64] {
            let cfg = collision_config(p.clone(), n, 50);
            g.bench_with_input(BenchmarkId::new(name, n), &cfg, |b, cfg| {
                b.iter(|| with_threads(Some(1), || run_estimator(cfg)).unwrap().unwrap())
            });
        }
    }
    g.finish();
}

fn tables(c: &mut Criterion) {
    c.bench_function("fast_tables_default", |b| b.iter(|| FastTables::new(Default::default())));
}

fn oracles(c: &mut Criterion) {
    let mut g = c.benchmark_group("oracle");
    g.bench_function("gambler_ruin_rational_64", |b| b.iter(|| absorption_probability(1, 64, Mode::Rational).unwrap()));
    g.bench_function("tooth_h_32", |b| b.iter(|| expected_tooth_collisions(32, 8, Mode::Float).unwrap()));
    let p = Profile::constant(6.0).unwrap();
    g.bench_function("comb_chain_r32", |b| b.iter(|| comb_chain(&p, 32).unwrap()));
    g.finish();
}

criterion_group!(benches, step_engine, collision_replicas, tables, oracles);
criterion_main!(benches);
