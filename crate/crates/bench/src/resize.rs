//! Time for a table starting at two buckets to absorb a whole key space.

use std::sync::Barrier;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wfext::{Config, HashFn, HashTable, OpStats, ReclaimMode};

use crate::error::BenchError;

#[derive(Clone, Debug)]
pub struct ResizeConfig {
    pub threads: usize,
    pub key_space: u64,
    pub bucket_capacity: usize,
    pub seed: u64,
    pub reclaim: ReclaimMode,
    /// Lookups interleaved per insert, in percent of inserts.
    pub lookup_pct: u8,
}

impl Default for ResizeConfig {
    fn default() -> Self {
        ResizeConfig {
            threads: 1,
            key_space: 1000,
            bucket_capacity: wfext::DEFAULT_BUCKET_CAPACITY,
            seed: 1,
            reclaim: ReclaimMode::Epoch,
            lookup_pct: 50,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ResizeReport {
    /// Wall time from the start signal until every key is inserted.
    pub elapsed: Duration,
    pub final_depth: u8,
    /// Depth sequential extendible hashing reaches with the same keys.
    pub oracle_depth: u8,
    pub buckets: usize,
    pub splits: u64,
    pub directory_publishes: u64,
    pub keys: usize,
    pub stats: OpStats,
}

/// Directory depth reached by sequential extendible hashing after inserting
/// all `keys`, starting from depth `initial` and splitting a bucket only
/// when an insert finds it full.
///
/// A bucket ends up split exactly when more than `capacity` keys share its
/// prefix, so the answer is one more than the longest prefix shared by any
/// `capacity + 1` keys, and does not depend on insertion order.
pub fn oracle_final_depth(keys: &[u64], capacity: usize, hash: HashFn, initial: u8) -> u8 {
    let mut h: Vec<u64> = keys.iter().map(|&k| hash.hash(k)).collect();
    h.sort_unstable();
    h.dedup();
    let deepest = h
        .windows(capacity + 1)
        .map(|w| (w[0] ^ w[capacity]).leading_zeros() as u8 + 1)
        .max()
        .unwrap_or(0);
    deepest.max(initial)
}

pub fn run_resize_benchmark(cfg: &ResizeConfig) -> Result<ResizeReport, BenchError> {
    if cfg.threads == 0 || cfg.bucket_capacity == 0 || cfg.lookup_pct > 100 {
        return Err(BenchError::Config("threads and bucket size must be positive".into()));
    }
    let table = HashTable::with_config(
        Config::new(cfg.threads, cfg.bucket_capacity).initial_depth(1).reclaim(cfg.reclaim).poison(false),
    )?;
    let mut keys: Vec<u64> = (0..cfg.key_space).collect();
    keys.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let chunk = keys.len().div_ceil(cfg.threads).max(1);
    let start = Barrier::new(cfg.threads + 1);
    let elapsed = std::thread::scope(|s| -> Result<Duration, BenchError> {
        let handles: Vec<_> = keys
            .chunks(chunk)
            .enumerate()
            .map(|(tid, mine)| {
                let (table, start) = (&table, &start);
                s.spawn(move || -> Result<(), BenchError> {
                    let mut c = table.register()?;
                    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                    rng.set_stream(tid as u64 + 1);
                    start.wait();
                    for &k in mine {
                        c.insert(k, k)?;
                        if rng.gen_range(0..100) < cfg.lookup_pct {
                            c.lookup(rng.gen_range(0..cfg.key_space));
                        }
                    }
                    Ok(())
                })
            })
            .collect();
        // Chunks may be fewer than threads for tiny key spaces.
        for _ in handles.len()..cfg.threads {
            s.spawn(|| start.wait());
        }
        start.wait();
        let t0 = Instant::now();
        for h in handles {
            h.join().expect("worker panicked")?;
        }
        Ok(t0.elapsed())
    })?;
    table.check_invariants().map_err(BenchError::Audit)?;
    let snap = table.snapshot();
    if snap.len() != keys.len() {
        return Err(BenchError::Audit(format!("{} keys stored, {} inserted", snap.len(), keys.len())));
    }
    let stats = table.stats();
    Ok(ResizeReport {
        elapsed,
        final_depth: snap.depth,
        oracle_depth: oracle_final_depth(&keys, cfg.bucket_capacity, HashFn::Mix, 1),
        buckets: snap.buckets.len(),
        splits: stats.splits,
        directory_publishes: stats.directory_publishes,
        keys: keys.len(),
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    /// Literal sequential extendible hashing: a directory of bucket ids and
    /// per-bucket (depth, keys), splitting on demand.
    fn simulate(keys: &[u64], b: usize, hash: HashFn) -> (u8, usize) {
        let mut depth = 1u8;
        let mut dir: Vec<usize> = vec![0, 1];
        let mut buckets: BTreeMap<usize, (u8, Vec<u64>)> = BTreeMap::from([(0, (1, vec![])), (1, (1, vec![]))]);
        let mut next_id = 2;
        let mut splits = 0;
        let idx = |h: u64, d: u8| (h >> (64 - d as u32)) as usize;
        for &k in keys {
            let h = hash.hash(k);
            loop {
                let id = dir[idx(h, depth)];
                let (bd, items) = buckets.get(&id).unwrap().clone();
                if items.len() < b {
                    buckets.get_mut(&id).unwrap().1.push(h);
                    break;
                }
                if bd == depth {
                    dir = dir.iter().flat_map(|&e| [e, e]).collect();
                    depth += 1;
                }
                let (z, o): (Vec<u64>, Vec<u64>) = items.iter().partition(|&&x| (x >> (63 - bd as u32)) & 1 == 0);
                let (a, c) = (next_id, next_id + 1);
                next_id += 2;
                splits += 1;
                buckets.remove(&id);
                buckets.insert(a, (bd + 1, z));
                buckets.insert(c, (bd + 1, o));
                for (e, slot) in dir.iter_mut().enumerate() {
                    if *slot == id {
                        let bit = (e >> (depth - bd - 1) as usize) & 1;
                        *slot = if bit == 0 { a } else { c };
                    }
                }
            }
        }
        (depth, splits)
    }

    #[test]
    fn closed_form_matches_simulation() {
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(1..600);
            let b = rng.gen_range(1..9);
            let keys: Vec<u64> = (0..n).map(|_| rng.gen_range(0..10_000)).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
            let (d, _) = simulate(&keys, b, HashFn::Mix);
            assert_eq!(oracle_final_depth(&keys, b, HashFn::Mix, 1), d, "seed {seed}");
        }
    }

    #[test]
    fn thousand_keys_final_depth_in_range() {
        let keys: Vec<u64> = (0..1000).collect();
        let (sim, _) = simulate(&keys, 8, HashFn::Mix);
        let lo = (1000f64 / 8.0).log2().ceil() as u8;
        assert!((lo..=lo + 2).contains(&sim), "simulated depth {sim}");
        let r = run_resize_benchmark(&ResizeConfig { key_space: 1000, ..Default::default() }).unwrap();
        assert_eq!(r.final_depth, sim);
        assert_eq!(r.oracle_depth, sim);
    }

    #[test]
    fn sixteen_keys_split_at_most_twice() {
        let keys: Vec<u64> = (0..16).collect();
        let (_, sim_splits) = simulate(&keys, 8, HashFn::Mix);
        assert!(sim_splits <= 2);
        let r = run_resize_benchmark(&ResizeConfig { key_space: 16, ..Default::default() }).unwrap();
        assert_eq!(r.splits, sim_splits as u64);
    }

    #[test]
    fn empty_run_stays_at_depth_one() {
        let r = run_resize_benchmark(&ResizeConfig { key_space: 0, threads: 2, ..Default::default() }).unwrap();
        assert_eq!(r.final_depth, 1);
        assert_eq!(r.keys, 0);
        assert!(r.elapsed < Duration::from_millis(100));
    }
}
