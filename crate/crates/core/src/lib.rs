//! Random walks on wedge combs `Comb(Z, f)`: simulation, collision
//! statistics, exact finite-chain oracles and Monte Carlo estimation.

pub mod acceptance;
pub mod collision;
pub mod error;
pub mod fast;
pub mod mc;
pub mod oracle;
pub mod profile;
pub mod rng;
pub mod walk;

pub use error::{Error, Result};
pub use profile::{Classification, Family, HeightLaw, Profile, Verdict, Vertex};
pub use rng::{derive_seed, RngStream};
