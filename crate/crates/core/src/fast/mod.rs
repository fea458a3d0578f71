//! Exact event-driven engine for long runs of two or three walkers.

mod engine;
pub mod kernel;
pub mod tables;

pub use engine::{run_fast, FastEngine, Observer, RunEnd, WalkerView};
pub use tables::{FastConfig, FastTables};
