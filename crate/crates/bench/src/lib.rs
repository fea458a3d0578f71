//! Fixtures shared by the benchmarks.

use combwalk::mc::{EstimatorSpec, ExperimentConfig};
use combwalk::Profile;

/// Profiles spanning bounded, polynomial and near-critical teeth.
pub fn profiles() -> Vec<(&'static str, Profile)> {
    vec![
        ("constant4", Profile::constant(4.0).expect("valid")),
        ("power2", Profile::power(2.0).expect("valid")),
        ("linlog0", Profile::linlog(0.0).expect("valid")),
        ("nlogn", Profile::nlogn()),
    ]
}

/// A small estimator run, sized for a benchmark iteration.
pub fn collision_config(profile: Profile, n: u64, replicas: u64) -> ExperimentConfig {
    ExperimentConfig::new(profile, EstimatorSpec::CollisionBeforeExit { n, d: 4 }, replicas, 1 << 40, 1)
}
