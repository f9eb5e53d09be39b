//! Command-line front end.

use std::io::Write;
use std::path::PathBuf;
use std::time::Duration;

use clap::{Parser, ValueEnum};
use wfext::{Fault, ReclaimMode};

use crate::error::BenchError;
use crate::lincheck::{sweep, LincheckConfig};
use crate::report::{write_csv, write_table, Row};
use crate::resize::{run_resize_benchmark, ResizeConfig};
use crate::workload::{run_throughput, Algorithm, Mix, WorkloadConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, ValueEnum)]
pub enum Mode {
    #[default]
    Throughput,
    Resize,
    Lincheck,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, ValueEnum)]
pub enum Reclaim {
    #[default]
    Epoch,
    Leak,
}

impl From<Reclaim> for ReclaimMode {
    fn from(r: Reclaim) -> Self {
        match r {
            Reclaim::Epoch => ReclaimMode::Epoch,
            Reclaim::Leak => ReclaimMode::Leak,
        }
    }
}

/// Fault injected into the table in lincheck mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, ValueEnum)]
pub enum Mutation {
    #[default]
    None,
    /// Apply announced operations without comparing sequence numbers.
    SkipSeqnumGuard,
}

impl From<Mutation> for Fault {
    fn from(m: Mutation) -> Self {
        match m {
            Mutation::None => Fault::None,
            Mutation::SkipSeqnumGuard => Fault::SkipSeqnumGuard,
        }
    }
}

/// Workload driver for the wfext hash table and the lock-based baseline.
#[derive(Debug, Parser)]
#[command(name = "wfext-bench", version)]
pub struct Args {
    #[arg(long, value_enum, default_value_t = Mode::Throughput)]
    pub mode: Mode,
    #[arg(long, value_enum, default_value_t = Algorithm::Wfext)]
    pub algo: Algorithm,
    /// Worker threads [default: 1; lincheck: 3].
    #[arg(long)]
    pub threads: Option<usize>,
    /// Seconds per timed run.
    #[arg(long, default_value_t = 5.0)]
    pub duration: f64,
    /// Number of distinct keys [default: 1000; lincheck: 2].
    #[arg(long)]
    pub keys: Option<u64>,
    /// Lookup/insert/delete percentages.
    #[arg(long, default_value = "50/25/25")]
    pub mix: Mix,
    /// Fraction of the keys inserted before timing.
    #[arg(long, default_value_t = 0.5)]
    pub prefill: f64,
    /// Items per bucket [default: 8; lincheck: 2].
    #[arg(long = "bucket-size")]
    pub bucket_size: Option<usize>,
    #[arg(long = "initial-depth", default_value_t = 1)]
    pub initial_depth: u8,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Reclaim::Epoch)]
    pub reclaim: Reclaim,
    /// Runs per configuration (lincheck: histories to check).
    #[arg(long, default_value_t = 1)]
    pub repeat: usize,
    /// Also write one CSV row per run to this file.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Operations per thread in lincheck mode.
    #[arg(long = "ops-per-thread", default_value_t = 4)]
    pub ops_per_thread: usize,
    /// Fault to inject in lincheck mode.
    #[arg(long, value_enum, default_value_t = Mutation::None)]
    pub fault: Mutation,
}

impl Args {
    pub fn workload(&self) -> WorkloadConfig {
        WorkloadConfig {
            algorithm: self.algo,
            threads: self.threads.unwrap_or(1),
            duration: Duration::from_secs_f64(self.duration.max(0.0)),
            key_space: self.keys.unwrap_or(1000),
            mix: self.mix,
            prefill: self.prefill,
            bucket_capacity: self.bucket_size.unwrap_or(wfext::DEFAULT_BUCKET_CAPACITY),
            initial_depth: self.initial_depth,
            seed: self.seed,
            reclaim: self.reclaim.into(),
            ops_per_thread: None,
        }
    }
}

/// Runs the selected mode, writing human-readable output to `out`.
pub fn run(args: &Args, out: &mut impl Write) -> Result<(), BenchError> {
    match args.mode {
        Mode::Throughput => {
            let mut rows = Vec::with_capacity(args.repeat);
            for run in 0..args.repeat.max(1) {
                let cfg = WorkloadConfig { seed: args.seed + run as u64, ..args.workload() };
                let report = run_throughput(&cfg)?;
                rows.push(Row::new(&cfg, run, &report));
            }
            write_table(out, &rows)?;
            if let Some(path) = &args.csv {
                write_csv(path, &rows)?;
            }
        }
        Mode::Resize => {
            if args.algo != Algorithm::Wfext {
                return Err(BenchError::Config("resize mode only applies to --algo wfext".into()));
            }
            if args.initial_depth != 1 {
                return Err(BenchError::Config("resize mode starts from two buckets (--initial-depth 1)".into()));
            }
            for run in 0..args.repeat.max(1) {
                let w = args.workload();
                let r = run_resize_benchmark(&ResizeConfig {
                    threads: w.threads,
                    key_space: w.key_space,
                    bucket_capacity: w.bucket_capacity,
                    seed: args.seed + run as u64,
                    reclaim: args.reclaim.into(),
                    lookup_pct: 50,
                })?;
                writeln!(
                    out,
                    "run {run}: {} keys in {:.3} s, depth {} (sequential {}), {} buckets, {} splits, {} directory publications",
                    r.keys,
                    r.elapsed.as_secs_f64(),
                    r.final_depth,
                    r.oracle_depth,
                    r.buckets,
                    r.splits,
                    r.directory_publishes
                )?;
            }
        }
        Mode::Lincheck => {
            let d = LincheckConfig::default();
            let base = LincheckConfig {
                threads: args.threads.unwrap_or(d.threads),
                ops_per_thread: args.ops_per_thread,
                keys: args.keys.unwrap_or(d.keys),
                bucket_capacity: args.bucket_size.unwrap_or(d.bucket_capacity),
                fault: args.fault.into(),
                ..d
            };
            let rep = sweep(&base, args.seed, args.repeat.max(1) as u64)?;
            writeln!(
                out,
                "{} histories checked ({} with splits), {} not linearizable",
                rep.histories, rep.with_splits, rep.violations
            )?;
            if let Some((seed, h)) = rep.first_violation {
                writeln!(out, "counterexample (seed {seed}):\n{h}")?;
            }
        }
    }
    Ok(())
}
