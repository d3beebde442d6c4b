//! Benchmark harness for the manufactured space-time problem: forcing, error
//! norms, work accounting, performance profiles and experiment drivers.

pub mod config;
pub mod manufactured;
pub mod metrics;
pub mod profile;
pub mod records;
pub mod reports;
pub mod runner;
