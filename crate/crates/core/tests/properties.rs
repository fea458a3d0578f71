//! Structural invariants under random profiles, starts and seeds.

use combwalk::collision::{run_pair, run_group, summarize, z_kh_count};
use combwalk::mc::{run_estimator, EstimatorSpec, ExperimentConfig};
use combwalk::profile::neighbors;
use combwalk::walk::StopSpec;
use combwalk::{HeightLaw, Profile, Vertex};
use proptest::prelude::*;

fn profile() -> impl Strategy<Value = Profile> {
    prop_oneof![
        (0u8..6).prop_map(|a| Profile::constant(a as f64).unwrap()),
        (0.3f64..2.5).prop_map(|a| Profile::power(a).unwrap()),
        (0.0f64..3.0).prop_map(|b| Profile::linlog(b).unwrap()),
        Just(Profile::nlogn()),
        (0.1f64..0.9, any::<u64>()).prop_map(|(p, s)| Profile::iid(HeightLaw::Geometric { p }, s).unwrap()),
        prop::collection::btree_map(-12i64..12, 0u8..8, 0..8)
            .prop_map(|m| Profile::table(m.into_iter().map(|(x, h)| (x, h as f64))).unwrap()),
    ]
}

/// A vertex of `profile` with `|x| <= 10`, picked by two unit draws.
fn vertex(p: &Profile, x: i64, u: f64) -> Vertex {
    let h = p.tooth_height(x).min(50);
    let y = (u * (2 * h + 1) as f64).floor() as i64 - h;
    Vertex::new(x, y.clamp(-h, h))
}

/// Moves `v` one edge if needed so that `v` and `w` have the same parity.
fn match_parity(p: &Profile, v: Vertex, w: Vertex) -> Vertex {
    if v.parity() == w.parity() {
        v
    } else {
        neighbors(p, v).unwrap()[0]
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn neighbours_are_symmetric(p in profile(), x in -10i64..=10, u in 0.0f64..1.0) {
        let v = vertex(&p, x, u);
        let ns = neighbors(&p, v).unwrap();
        prop_assert!(!ns.is_empty());
        for w in ns.iter() {
            prop_assert!(neighbors(&p, *w).unwrap().contains(&v), "{v} -> {w}");
            prop_assert_eq!((w.x - v.x).abs() + (w.y - v.y).abs(), 1);
        }
    }

    #[test]
    fn partial_sums_monotone(p in profile(), n in 1u64..400) {
        let (a, b) = (p.reciprocal_partial_sum(n), p.reciprocal_partial_sum(n + 1));
        prop_assert!(b > a && b - a <= 1.0);
        prop_assert!(a <= n as f64);
        prop_assert!(p.breve_f(n + 1) >= p.breve_f(n));
    }

    #[test]
    fn pair_invariants(
        p in profile(),
        (xa, xb) in (-10i64..=10, -10i64..=10),
        (ua, ub) in (0.0f64..1.0, 0.0f64..1.0),
        horizon in 1u64..400,
        seed: u64,
    ) {
        let a = vertex(&p, xa, ua);
        let b = match_parity(&p, vertex(&p, xb, ub), a);
        let run = run_pair(&p, [a, b], horizon, &StopSpec::default(), seed).unwrap();
        prop_assert!(!run.parity_warning);
        for n in 0..=run.last_time() {
            prop_assert_eq!(run.parity(n), 0);
        }
        for w in run.z_seq.windows(2) {
            prop_assert!((w[1] - w[0]).abs() <= 1);
        }
        for m in run.z_jump_times.windows(2) {
            let (s, t) = (m[0] as usize, m[1] as usize);
            prop_assert_eq!((run.z_seq[t] - run.z_seq[s]).abs(), 1);
        }
        for &n in &run.collisions {
            prop_assert_eq!(run.a.path[n as usize], run.b.path[n as usize]);
        }
    }

    #[test]
    fn middle_third_below_total(p in profile(), k in -4i64..=4, frac in 0.0f64..=1.0, seed: u64) {
        let top = p.tooth_height(k).min(40);
        let h = (frac * top as f64).floor() as i64;
        let (trajs, _) = run_group(&p, &[Vertex::spine(0); 2], 300, &StopSpec::default(), seed).unwrap();
        let (z, tilde) = z_kh_count(&trajs, &p, k, h).unwrap();
        prop_assert!(tilde <= z);
    }

    #[test]
    fn windows_never_exceed_total(p in profile(), d in 2u64..4, m_max in 1u32..5, seed: u64) {
        let (trajs, _) = run_group(&p, &[Vertex::spine(0); 2], 500, &StopSpec::default(), seed).unwrap();
        let s = summarize(&trajs, &p, d, m_max, &[]).unwrap();
        let sum: u64 = s.windows.iter().sum();
        prop_assert!(sum <= s.total);
        if s.covered_until.is_none() {
            prop_assert_eq!(sum, s.total);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn estimate_brackets_point(v in 1i64..6, replicas in 1u64..200, seed: u64, mean in any::<bool>()) {
        let p = Profile::constant(12.0).unwrap();
        let spec = if mean {
            EstimatorSpec::ToothH { u: 0, v: 2 * (v % 3), h: None }
        } else {
            EstimatorSpec::GamblerRuin { v }
        };
        let e = run_estimator(&ExperimentConfig::new(p, spec, replicas, 100_000, seed)).unwrap();
        prop_assert!(e.ci_lo <= e.point && e.point <= e.ci_hi, "{e:?}");
        prop_assert!(e.stderr >= 0.0);
    }

    #[test]
    fn json_round_trips(p in profile(), n in 1u64..64, replicas in 1u64..1000, seed: u64) {
        let back = Profile::from_json(&p.to_json()).unwrap();
        prop_assert_eq!(back.to_json(), p.to_json());
        for x in -10..=10 {
            prop_assert_eq!(back.tooth_height(x), p.tooth_height(x));
        }
        let cfg = ExperimentConfig::new(p, EstimatorSpec::CollisionBeforeExit { n, d: 4 }, replicas, 1 << 20, seed);
        let text = serde_json::to_string(&cfg).unwrap();
        let again = ExperimentConfig::from_json(&text).unwrap();
        prop_assert_eq!(serde_json::to_string(&again).unwrap(), text);
        prop_assert_eq!(again.fingerprint(), cfg.fingerprint());
    }
}
