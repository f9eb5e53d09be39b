//! Mixed-operation throughput runs.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Barrier;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wfext::{Config, HashFn, HashTable, LockTable, OpStats, ReclaimMode, ThreadContext};

use crate::error::BenchError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    #[default]
    Wfext,
    Lock,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Wfext => "wfext",
            Algorithm::Lock => "lock",
        })
    }
}

/// Percentages of lookups, inserts and deletes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Mix {
    pub lookup: u8,
    pub insert: u8,
    pub delete: u8,
}

impl Mix {
    pub const fn new(lookup: u8, insert: u8, delete: u8) -> Self {
        Mix { lookup, insert, delete }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let sum = self.lookup as u32 + self.insert as u32 + self.delete as u32;
        if sum != 100 {
            return Err(BenchError::Config(format!("mix {self} sums to {sum}, not 100")));
        }
        Ok(())
    }

    fn pick(&self, roll: u8) -> OpKind {
        if roll < self.lookup {
            OpKind::Lookup
        } else if roll < self.lookup + self.insert {
            OpKind::Insert
        } else {
            OpKind::Delete
        }
    }
}

impl Default for Mix {
    fn default() -> Self {
        Mix::new(50, 25, 25)
    }
}

impl fmt::Display for Mix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.lookup, self.insert, self.delete)
    }
}

impl FromStr for Mix {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        let parts: Vec<&str> = s.split('/').collect();
        let bad = || BenchError::Config(format!("mix must look like L/I/D, got {s:?}"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let n: Vec<u8> = parts.iter().map(|p| p.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?;
        let mix = Mix::new(n[0], n[1], n[2]);
        mix.validate()?;
        Ok(mix)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OpKind {
    Lookup,
    Insert,
    Delete,
}

#[derive(Clone, Debug)]
pub struct WorkloadConfig {
    pub algorithm: Algorithm,
    pub threads: usize,
    pub duration: Duration,
    /// Number of distinct keys; keys are drawn from `0..key_space`.
    pub key_space: u64,
    pub mix: Mix,
    /// Fraction of the key space inserted before timing starts.
    pub prefill: f64,
    pub bucket_capacity: usize,
    pub initial_depth: u8,
    pub seed: u64,
    pub reclaim: ReclaimMode,
    /// Stop each worker after this many operations, even before `duration`.
    pub ops_per_thread: Option<u64>,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig {
            algorithm: Algorithm::Wfext,
            threads: 1,
            duration: Duration::from_secs(5),
            key_space: 1000,
            mix: Mix::default(),
            prefill: 0.5,
            bucket_capacity: wfext::DEFAULT_BUCKET_CAPACITY,
            initial_depth: 1,
            seed: 1,
            reclaim: ReclaimMode::Epoch,
            ops_per_thread: None,
        }
    }
}

impl WorkloadConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        self.mix.validate()?;
        let bad = |m: &str| Err(BenchError::Config(m.to_owned()));
        if self.threads == 0 {
            return bad("threads must be at least 1");
        }
        if self.key_space == 0 {
            return bad("key space must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.prefill) {
            return bad("prefill must be within [0, 1]");
        }
        if self.bucket_capacity == 0 {
            return bad("bucket size must be at least 1");
        }
        if self.initial_depth == 0 || self.initial_depth > wfext::DEFAULT_MAX_DEPTH {
            return bad("initial depth out of range");
        }
        Ok(())
    }

    pub(crate) fn table_config(&self, threads: usize) -> Config {
        Config::new(threads, self.bucket_capacity)
            .initial_depth(self.initial_depth)
            .reclaim(self.reclaim)
            .poison(false)
    }
}

/// Seeded operation generator for one worker. Identical seed and thread
/// index give an identical stream.
pub struct OpStream {
    rng: ChaCha8Rng,
    mix: Mix,
    key_space: u64,
}

impl OpStream {
    pub fn new(seed: u64, thread: usize, mix: Mix, key_space: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(thread as u64 + 1);
        OpStream { rng, mix, key_space }
    }
}

impl Iterator for OpStream {
    type Item = (OpKind, u64);

    fn next(&mut self) -> Option<(OpKind, u64)> {
        let kind = self.mix.pick(self.rng.gen_range(0..100));
        Some((kind, self.rng.gen_range(0..self.key_space)))
    }
}

/// Keys inserted by the prefill phase: a seeded uniform sample without repetition.
pub fn prefill_keys(key_space: u64, fraction: f64, seed: u64) -> Vec<u64> {
    let n = (key_space as f64 * fraction).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    let mut all: Vec<u64> = (0..key_space).collect();
    let (picked, _) = all.partial_shuffle(&mut rng, n);
    picked.to_vec()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct KindCounts {
    pub lookups: u64,
    pub inserts: u64,
    pub deletes: u64,
}

impl KindCounts {
    pub fn total(&self) -> u64 {
        self.lookups + self.inserts + self.deletes
    }

    fn add(&mut self, o: &KindCounts) {
        self.lookups += o.lookups;
        self.inserts += o.inserts;
        self.deletes += o.deletes;
    }
}

#[derive(Clone, Debug)]
pub struct ThroughputReport {
    pub ops_total: u64,
    pub ops_per_second: f64,
    pub counts: KindCounts,
    /// Lookups that found their key.
    pub lookup_hits: u64,
    /// Bucket splits performed during the timed phase (0 for the lock table).
    pub resize_count: u64,
    /// Final directory depth (fixed bucket-index width for the lock table).
    pub directory_depth_final: u8,
    /// Peak resident set size of the process, if the platform reports it.
    pub memory_high_water: Option<u64>,
    pub elapsed: Duration,
    pub table_stats: Option<OpStats>,
}

/// A worker's handle on either table. Kept unboxed: it sits on the per-operation path.
#[allow(clippy::large_enum_variant)]
pub enum Worker<'a> {
    Wfext(ThreadContext<'a>),
    Lock(&'a LockTable),
}

impl Worker<'_> {
    pub fn lookup(&mut self, key: u64) -> Option<u64> {
        match self {
            Worker::Wfext(c) => c.lookup(key),
            Worker::Lock(t) => t.lookup(key),
        }
    }

    pub fn insert(&mut self, key: u64, value: u64) -> Result<wfext::Outcome, BenchError> {
        Ok(match self {
            Worker::Wfext(c) => c.insert(key, value)?,
            Worker::Lock(t) => t.insert(key, value),
        })
    }

    pub fn delete(&mut self, key: u64) -> Result<wfext::Outcome, BenchError> {
        Ok(match self {
            Worker::Wfext(c) => c.delete(key)?,
            Worker::Lock(t) => t.delete(key),
        })
    }
}

/// Either table, built for a workload.
pub enum Target {
    Wfext(Box<HashTable>),
    Lock(LockTable),
}

impl Target {
    /// `threads` is the number of registered workers the table must admit.
    pub fn build(cfg: &WorkloadConfig, threads: usize) -> Result<Self, BenchError> {
        Ok(match cfg.algorithm {
            Algorithm::Wfext => Target::Wfext(Box::new(HashTable::with_config(cfg.table_config(threads))?)),
            Algorithm::Lock => {
                Target::Lock(LockTable::sized_for(cfg.key_space as usize, cfg.bucket_capacity, HashFn::Mix))
            }
        })
    }

    pub fn worker(&self) -> Result<Worker<'_>, BenchError> {
        Ok(match self {
            Target::Wfext(t) => Worker::Wfext(t.register()?),
            Target::Lock(t) => Worker::Lock(t),
        })
    }

    pub fn depth(&self) -> u8 {
        match self {
            Target::Wfext(t) => t.depth(),
            Target::Lock(t) => t.depth(),
        }
    }

    /// Audits the structure after a run.
    pub fn check(&self) -> Result<(), BenchError> {
        match self {
            Target::Wfext(t) => t.check_invariants().map_err(BenchError::Audit),
            Target::Lock(_) => Ok(()),
        }
    }
}

struct WorkerResult {
    counts: KindCounts,
    hits: u64,
    stats: Option<OpStats>,
}

fn run_worker(
    mut w: Worker<'_>,
    ops: OpStream,
    tid: usize,
    limit: Option<u64>,
    stop: &AtomicBool,
    start: &Barrier,
) -> Result<WorkerResult, BenchError> {
    let mut counts = KindCounts::default();
    let mut hits = 0;
    start.wait();
    let limit = limit.unwrap_or(u64::MAX);
    for (n, (kind, key)) in ops.enumerate() {
        let n = n as u64;
        if n >= limit || (n.is_multiple_of(64) && stop.load(Ordering::Relaxed)) {
            break;
        }
        match kind {
            OpKind::Lookup => {
                counts.lookups += 1;
                hits += w.lookup(key).is_some() as u64;
            }
            OpKind::Insert => {
                counts.inserts += 1;
                w.insert(key, (tid as u64) << 48 | n)?;
            }
            OpKind::Delete => {
                counts.deletes += 1;
                w.delete(key)?;
            }
        }
    }
    let stats = match &w {
        Worker::Wfext(c) => Some(c.stats()),
        Worker::Lock(_) => None,
    };
    Ok(WorkerResult { counts, hits, stats })
}

/// Prefills, then runs `cfg.threads` workers for `cfg.duration` (or until
/// each has done `ops_per_thread` operations). Prefill is not timed.
pub fn run_throughput(cfg: &WorkloadConfig) -> Result<ThroughputReport, BenchError> {
    cfg.validate()?;
    // One extra registration for the prefill context.
    let target = Target::build(cfg, cfg.threads + 1)?;
    {
        let mut w = target.worker()?;
        for k in prefill_keys(cfg.key_space, cfg.prefill, cfg.seed) {
            w.insert(k, k)?;
        }
    }
    let splits_before = match &target {
        Target::Wfext(t) => t.stats().splits,
        Target::Lock(_) => 0,
    };
    let stop = AtomicBool::new(false);
    let start = Barrier::new(cfg.threads + 1);
    let (results, elapsed) = std::thread::scope(|s| -> Result<_, BenchError> {
        let handles: Vec<_> = (0..cfg.threads)
            .map(|tid| {
                let (target, stop, start) = (&target, &stop, &start);
                let ops = OpStream::new(cfg.seed, tid, cfg.mix, cfg.key_space);
                s.spawn(move || run_worker(target.worker()?, ops, tid, cfg.ops_per_thread, stop, start))
            })
            .collect();
        start.wait();
        let t0 = Instant::now();
        let deadline = t0 + cfg.duration;
        while Instant::now() < deadline && !handles.iter().all(|h| h.is_finished()) {
            std::thread::sleep(Duration::from_millis(5).min(deadline.saturating_duration_since(Instant::now())));
        }
        stop.store(true, Ordering::Relaxed);
        let results: Vec<_> = handles.into_iter().map(|h| h.join().expect("worker panicked")).collect();
        let elapsed = t0.elapsed();
        Ok((results.into_iter().collect::<Result<Vec<_>, _>>()?, elapsed))
    })?;
    target.check()?;
    let mut counts = KindCounts::default();
    let mut hits = 0;
    let mut stats: Option<OpStats> = None;
    for r in &results {
        counts.add(&r.counts);
        hits += r.hits;
        if let Some(s) = &r.stats {
            stats.get_or_insert_with(OpStats::default).absorb(s);
        }
    }
    let resize_count = match &target {
        Target::Wfext(t) => t.stats().splits - splits_before,
        Target::Lock(_) => 0,
    };
    let ops_total = counts.total();
    Ok(ThroughputReport {
        ops_total,
        ops_per_second: ops_total as f64 / elapsed.as_secs_f64().max(1e-9),
        counts,
        lookup_hits: hits,
        resize_count,
        directory_depth_final: target.depth(),
        memory_high_water: crate::report::memory_high_water(),
        elapsed,
        table_stats: stats,
    })
}
