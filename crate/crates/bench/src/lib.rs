//! Benchmarks and checks for the `wfext` hash table: mixed-operation
//! throughput runs against a lock-per-bucket baseline, a resize-time
//! benchmark, and a linearizability checker for recorded histories.

pub mod cli;
mod error;
pub mod lincheck;
pub mod report;
pub mod resize;
pub mod workload;

pub use error::BenchError;
