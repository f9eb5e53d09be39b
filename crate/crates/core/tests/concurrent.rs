//! Multi-threaded runs checked against per-thread sequential expectations.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wfext::{Config, HashTable, Outcome, Prefix};

/// Each thread owns a disjoint key range, so its own outcomes must match a
/// private sequential dictionary exactly, while splits and helping mix all
/// threads' work in shared buckets.
fn disjoint_run(threads: usize, b: usize, ops: usize, keys_per_thread: u64, seed: u64) -> HashTable {
    let t = HashTable::with_config(Config::new(threads, b).poison(true).batch(32)).unwrap();
    let finals: Vec<HashMap<u64, u64>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|i| {
                let t = &t;
                s.spawn(move || {
                    let mut c = t.register().unwrap();
                    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ i as u64);
                    let mut map = HashMap::new();
                    for n in 0..ops {
                        let key = (i as u64) << 32 | rng.gen_range(0..keys_per_thread);
                        match rng.gen_range(0..3) {
                            0 => {
                                let want = if map.insert(key, n as u64).is_some() { Outcome::Updated } else { Outcome::Inserted };
                                assert_eq!(c.insert(key, n as u64).unwrap(), want);
                            }
                            1 => {
                                let want = if map.remove(&key).is_some() { Outcome::Deleted } else { Outcome::Absent };
                                assert_eq!(c.delete(key).unwrap(), want);
                            }
                            _ => assert_eq!(c.lookup(key), map.get(&key).copied()),
                        }
                        if n % 64 == 0 {
                            std::thread::yield_now();
                        }
                    }
                    let s = c.stats();
                    assert!(s.apply_max_cas <= 2, "{s:?}");
                    assert!(s.resize_max_publish <= 2, "{s:?}");
                    assert_eq!(s.apply_unresolved, 0);
                    map
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    t.check_invariants().unwrap();
    let mut want: Vec<(u64, u64)> = finals.into_iter().flatten().collect();
    want.sort_unstable();
    assert_eq!(t.snapshot().entries(), want);
    assert_eq!(t.poison_hits(), 0);
    t
}

#[test]
fn disjoint_keys_small_buckets() {
    let t = disjoint_run(4, 2, 20_000, 64, 1);
    assert!(t.stats().splits > 0);
}

#[test]
fn disjoint_keys_default_buckets() {
    disjoint_run(3, 8, 20_000, 512, 2);
}

#[test]
fn shared_keys_end_in_a_consistent_state() {
    let t = HashTable::with_config(Config::new(4, 2).poison(true)).unwrap();
    std::thread::scope(|s| {
        for i in 0..4u64 {
            let t = &t;
            s.spawn(move || {
                let mut c = t.register().unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(i);
                for _ in 0..10_000 {
                    let key = rng.gen_range(0..32u64);
                    if rng.gen_bool(0.6) {
                        c.insert(key, i).unwrap();
                    } else {
                        c.delete(key).unwrap();
                    }
                }
            });
        }
    });
    t.check_invariants().unwrap();
    // Every surviving value was written by some thread.
    assert!(t.snapshot().entries().iter().all(|&(k, v)| k < 32 && v < 4));
    assert_eq!(t.poison_hits(), 0);
}

#[test]
fn merges_race_with_updates() {
    let t = HashTable::with_config(Config::new(3, 4).poison(true)).unwrap();
    let stop = AtomicBool::new(false);
    std::thread::scope(|s| {
        let merger = s.spawn(|| {
            let mut c = t.register().unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            let mut merged = 0;
            while !stop.load(Ordering::Relaxed) {
                let len = rng.gen_range(1..5u8);
                if c.request_merge(Prefix::new(rng.gen(), len)).unwrap() == wfext::MergeOutcome::Merged {
                    merged += 1;
                }
                std::thread::yield_now();
            }
            merged
        });
        let workers: Vec<_> = (0..2u64)
            .map(|i| {
                let t = &t;
                s.spawn(move || {
                    let mut c = t.register().unwrap();
                    let mut rng = ChaCha8Rng::seed_from_u64(i);
                    let mut map = HashMap::new();
                    for n in 0..15_000u64 {
                        let key = i << 40 | rng.gen_range(0..48u64);
                        if rng.gen_bool(0.5) {
                            map.insert(key, n);
                            c.insert(key, n).unwrap();
                        } else {
                            let want = if map.remove(&key).is_some() { Outcome::Deleted } else { Outcome::Absent };
                            assert_eq!(c.delete(key).unwrap(), want);
                        }
                    }
                    map
                })
            })
            .collect();
        let maps: Vec<HashMap<u64, u64>> = workers.into_iter().map(|h| h.join().unwrap()).collect();
        stop.store(true, Ordering::Relaxed);
        let merged = merger.join().unwrap();
        assert!(merged > 0);
        let mut want: Vec<(u64, u64)> = maps.into_iter().flatten().collect();
        want.sort_unstable();
        assert_eq!(t.snapshot().entries(), want);
    });
    t.check_invariants().unwrap();
    assert_eq!(t.poison_hits(), 0);
}

#[test]
fn guest_lookups_during_updates() {
    let t = HashTable::with_config(Config::new(2, 4).poison(true)).unwrap();
    let stop = AtomicBool::new(false);
    std::thread::scope(|s| {
        for _ in 0..3 {
            s.spawn(|| {
                while !stop.load(Ordering::Relaxed) {
                    for k in 0..64 {
                        if let Some(v) = t.lookup(k) {
                            assert_eq!(v, k * 10);
                        }
                    }
                    std::thread::yield_now();
                }
            });
        }
        let writers: Vec<_> = (0..2u64)
            .map(|i| {
                let t = &t;
                s.spawn(move || {
                    let mut c = t.register().unwrap();
                    for round in 0..200 {
                        for k in (i..64).step_by(2) {
                            if round % 2 == 0 {
                                c.insert(k, k * 10).unwrap();
                            } else {
                                c.delete(k).unwrap();
                            }
                        }
                    }
                })
            })
            .collect();
        for w in writers {
            w.join().unwrap();
        }
        stop.store(true, Ordering::Relaxed);
    });
    assert_eq!(t.poison_hits(), 0);
}
