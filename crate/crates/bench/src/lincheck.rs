//! History recording and a Wing-Gong style linearizability checker for the
//! dictionary specification.
//!
//! Each operation records an invocation and a response stamp from a shared
//! logical clock. The checker searches for a total order that respects
//! real-time precedence (an operation that responded before another was
//! invoked must come first) and reproduces every recorded result when
//! replayed on a sequential dictionary. Visited (linearized set, dictionary
//! state) pairs are memoized.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Barrier};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wfext::{Config, Fault, HashFn, HashTable, Hooks, OpStats, Outcome, Prefix};

use crate::error::BenchError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Call {
    Insert(u64, u64),
    Delete(u64),
    Lookup(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Ret {
    Update(Outcome),
    Value(Option<u64>),
}

impl fmt::Display for Call {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Call::Insert(k, v) => write!(f, "insert({k:#x}, {v:#x})"),
            Call::Delete(k) => write!(f, "delete({k:#x})"),
            Call::Lookup(k) => write!(f, "lookup({k:#x})"),
        }
    }
}

impl fmt::Display for Ret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Ret::Update(o) => write!(f, "{o:?}"),
            Ret::Value(Some(v)) => write!(f, "{v:#x}"),
            Ret::Value(None) => f.write_str("none"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Event {
    pub thread: usize,
    pub call: Call,
    pub ret: Ret,
    pub invoked: u64,
    pub responded: u64,
}

/// A complete concurrent history.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct History {
    pub events: Vec<Event>,
}

impl fmt::Display for History {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut ev = self.events.clone();
        ev.sort_by_key(|e| e.invoked);
        for e in ev {
            writeln!(f, "  [{:>3}, {:>3}] T{} {} -> {}", e.invoked, e.responded, e.thread, e.call, e.ret)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Linearizable,
    Violation(History),
}

impl Verdict {
    pub fn is_linearizable(&self) -> bool {
        matches!(self, Verdict::Linearizable)
    }
}

type Dict = BTreeMap<u64, u64>;

fn apply(state: &mut Dict, call: Call) -> Ret {
    match call {
        Call::Insert(k, v) => Ret::Update(if state.insert(k, v).is_some() { Outcome::Updated } else { Outcome::Inserted }),
        Call::Delete(k) => Ret::Update(if state.remove(&k).is_some() { Outcome::Deleted } else { Outcome::Absent }),
        Call::Lookup(k) => Ret::Value(state.get(&k).copied()),
    }
}

/// Default bound on explored search nodes.
pub const DEFAULT_BUDGET: u64 = 1_000_000;

/// Checks `h` against the sequential dictionary starting from `initial`.
pub fn check(h: &History, initial: &Dict, budget: u64) -> Result<Verdict, BenchError> {
    let n = h.events.len();
    assert!(n <= 64, "histories are limited to 64 operations");
    let mut seen: HashSet<(u64, Vec<(u64, u64)>)> = HashSet::new();
    let mut steps = 0u64;
    let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let ok = search(&h.events, 0, full, &mut initial.clone(), &mut seen, &mut steps, budget)?;
    Ok(if ok { Verdict::Linearizable } else { Verdict::Violation(h.clone()) })
}

fn search(
    ev: &[Event],
    done: u64,
    full: u64,
    state: &mut Dict,
    seen: &mut HashSet<(u64, Vec<(u64, u64)>)>,
    steps: &mut u64,
    budget: u64,
) -> Result<bool, BenchError> {
    if done == full {
        return Ok(true);
    }
    *steps += 1;
    if *steps > budget {
        return Err(BenchError::CheckTimeout(budget));
    }
    if !seen.insert((done, state.iter().map(|(&k, &v)| (k, v)).collect())) {
        return Ok(false);
    }
    // Only an operation invoked before every pending response can go next.
    let horizon = (0..ev.len()).filter(|i| done >> i & 1 == 0).map(|i| ev[i].responded).min().unwrap_or(u64::MAX);
    for i in 0..ev.len() {
        if done >> i & 1 == 1 || ev[i].invoked > horizon {
            continue;
        }
        let before = state.clone();
        if apply(state, ev[i].call) == ev[i].ret && search(ev, done | 1 << i, full, state, seen, steps, budget)? {
            return Ok(true);
        }
        *state = before;
    }
    Ok(false)
}

/// Parameters of one recorded run.
#[derive(Clone, Debug)]
pub struct LincheckConfig {
    pub threads: usize,
    pub ops_per_thread: usize,
    /// Keys are `0..keys`, spread over distinct leading bits.
    pub keys: u64,
    pub bucket_capacity: usize,
    pub seed: u64,
    pub fault: Fault,
    /// Yield at interposition points to widen interleavings.
    pub chaos: bool,
    pub budget: u64,
}

impl Default for LincheckConfig {
    fn default() -> Self {
        LincheckConfig {
            threads: 3,
            ops_per_thread: 4,
            keys: 2,
            bucket_capacity: 2,
            seed: 0,
            fault: Fault::None,
            chaos: true,
            budget: DEFAULT_BUDGET,
        }
    }
}

impl LincheckConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        if !(1..=4).contains(&self.threads) || !(1..=8).contains(&self.keys) {
            return Err(BenchError::Config("lincheck needs 1..=4 threads and 1..=8 keys".into()));
        }
        if self.threads * self.ops_per_thread > 12 {
            return Err(BenchError::Config("lincheck histories are limited to 12 operations".into()));
        }
        if self.bucket_capacity == 0 {
            return Err(BenchError::Config("bucket size must be positive".into()));
        }
        Ok(())
    }
}

/// Key `i` gets leading bits `i`, so with the identity hash a handful of
/// keys spread over a few directory levels instead of one deep chain.
pub fn spread_key(i: u64) -> u64 {
    Prefix::new(i, 3).left_aligned() | i
}

struct Chaos {
    seed: u64,
    tick: AtomicU64,
}

impl Chaos {
    fn maybe_yield(&self, tid: usize) {
        let t = self.tick.fetch_add(1, Ordering::Relaxed);
        let mut x = self.seed ^ (t << 8) ^ tid as u64;
        x ^= x >> 31;
        x = x.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        if (x >> 61) < 3 {
            std::thread::yield_now();
        }
    }
}

impl Hooks for Chaos {
    fn after_toggle_flip(&self, tid: usize, _seq: u64, _prefix: Prefix) {
        self.maybe_yield(tid);
    }
    fn before_state_cas(&self, tid: usize, _prefix: Prefix) {
        self.maybe_yield(tid);
    }
    fn before_directory_cas(&self, tid: usize) {
        self.maybe_yield(tid);
    }
}

/// Runs a small random workload, records its history and checks it.
pub fn record(cfg: &LincheckConfig) -> Result<History, BenchError> {
    record_with_stats(cfg).map(|(h, _)| h)
}

/// Like [`record`], also returning the table's operation counters.
pub fn record_with_stats(cfg: &LincheckConfig) -> Result<(History, OpStats), BenchError> {
    cfg.validate()?;
    let mut tcfg = Config::new(cfg.threads, cfg.bucket_capacity).hash(HashFn::Identity).max_depth(8).fault(cfg.fault);
    if cfg.chaos {
        tcfg = tcfg.hooks(Arc::new(Chaos { seed: cfg.seed, tick: AtomicU64::new(0) }));
    }
    let table = HashTable::with_config(tcfg)?;
    let clock = AtomicU64::new(0);
    let start = Barrier::new(cfg.threads);
    let mut events = std::thread::scope(|s| -> Result<Vec<Event>, BenchError> {
        let handles: Vec<_> = (0..cfg.threads)
            .map(|tid| {
                let (table, clock, start) = (&table, &clock, &start);
                s.spawn(move || -> Result<Vec<Event>, BenchError> {
                    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                    rng.set_stream(tid as u64 + 1);
                    let mut c = table.register()?;
                    let mut out = Vec::with_capacity(cfg.ops_per_thread);
                    start.wait();
                    for n in 0..cfg.ops_per_thread {
                        let key = spread_key(rng.gen_range(0..cfg.keys));
                        let call = match rng.gen_range(0..3) {
                            0 => Call::Insert(key, ((tid as u64) << 32) | (n as u64 + 1)),
                            1 => Call::Delete(key),
                            _ => Call::Lookup(key),
                        };
                        let invoked = clock.fetch_add(1, Ordering::SeqCst);
                        let ret = match call {
                            Call::Insert(k, v) => Ret::Update(c.insert(k, v)?),
                            Call::Delete(k) => Ret::Update(c.delete(k)?),
                            Call::Lookup(k) => Ret::Value(c.lookup(k)),
                        };
                        let responded = clock.fetch_add(1, Ordering::SeqCst);
                        out.push(Event { thread: tid, call, ret, invoked, responded });
                    }
                    Ok(out)
                })
            })
            .collect();
        let mut all = Vec::new();
        for h in handles {
            all.extend(h.join().expect("worker panicked")?);
        }
        Ok(all)
    })?;
    // A final quiescent read of every key pins down the end state.
    let base = clock.load(Ordering::SeqCst);
    for (i, k) in (0..cfg.keys).map(spread_key).enumerate() {
        let t = base + 2 * i as u64;
        events.push(Event { thread: cfg.threads, call: Call::Lookup(k), ret: Ret::Value(table.lookup(k)), invoked: t, responded: t + 1 });
    }
    Ok((History { events }, table.stats()))
}

pub fn record_and_check(cfg: &LincheckConfig) -> Result<Verdict, BenchError> {
    let h = record(cfg)?;
    check(&h, &Dict::new(), cfg.budget)
}

/// Outcome of checking many seeds.
#[derive(Clone, Debug, Default)]
pub struct SweepReport {
    pub histories: u64,
    pub violations: u64,
    /// Histories during which at least one bucket split.
    pub with_splits: u64,
    pub first_violation: Option<(u64, History)>,
}

/// Checks `count` histories with seeds `first_seed..first_seed + count`.
pub fn sweep(base: &LincheckConfig, first_seed: u64, count: u64) -> Result<SweepReport, BenchError> {
    let mut rep = SweepReport::default();
    for seed in first_seed..first_seed + count {
        let cfg = LincheckConfig { seed, ..base.clone() };
        rep.histories += 1;
        let (h, stats) = record_with_stats(&cfg)?;
        rep.with_splits += (stats.splits > 0) as u64;
        if let Verdict::Violation(h) = check(&h, &Dict::new(), cfg.budget)? {
            rep.violations += 1;
            rep.first_violation.get_or_insert((seed, h));
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(thread: usize, call: Call, ret: Ret, invoked: u64, responded: u64) -> Event {
        Event { thread, call, ret, invoked, responded }
    }

    #[test]
    fn sequential_history_is_linearizable() {
        let h = History {
            events: vec![
                ev(0, Call::Insert(1, 10), Ret::Update(Outcome::Inserted), 0, 1),
                ev(0, Call::Lookup(1), Ret::Value(Some(10)), 2, 3),
                ev(0, Call::Delete(1), Ret::Update(Outcome::Deleted), 4, 5),
                ev(0, Call::Delete(1), Ret::Update(Outcome::Absent), 6, 7),
            ],
        };
        assert!(check(&h, &Dict::new(), DEFAULT_BUDGET).unwrap().is_linearizable());
    }

    #[test]
    fn overlapping_operations_may_reorder() {
        // The lookup overlaps the insert, so seeing either value is fine.
        let h = History {
            events: vec![
                ev(0, Call::Insert(1, 10), Ret::Update(Outcome::Inserted), 0, 3),
                ev(1, Call::Lookup(1), Ret::Value(None), 1, 2),
            ],
        };
        assert!(check(&h, &Dict::new(), DEFAULT_BUDGET).unwrap().is_linearizable());
    }

    #[test]
    fn stale_read_after_completion_is_rejected() {
        let h = History {
            events: vec![
                ev(0, Call::Insert(1, 10), Ret::Update(Outcome::Inserted), 0, 1),
                ev(1, Call::Lookup(1), Ret::Value(None), 2, 3),
            ],
        };
        assert!(!check(&h, &Dict::new(), DEFAULT_BUDGET).unwrap().is_linearizable());
    }

    #[test]
    fn double_application_is_rejected() {
        // Two inserts of a fresh key both claiming to have inserted it, strictly ordered.
        let h = History {
            events: vec![
                ev(0, Call::Insert(1, 10), Ret::Update(Outcome::Inserted), 0, 1),
                ev(1, Call::Delete(1), Ret::Update(Outcome::Deleted), 2, 3),
                ev(2, Call::Lookup(1), Ret::Value(Some(10)), 4, 5),
            ],
        };
        assert!(!check(&h, &Dict::new(), DEFAULT_BUDGET).unwrap().is_linearizable());
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let mut events: Vec<Event> =
            (0..12).map(|i| ev(i, Call::Insert(i as u64, 1), Ret::Update(Outcome::Inserted), 0, 100)).collect();
        events.push(ev(12, Call::Lookup(0), Ret::Value(Some(2)), 200, 201));
        let r = check(&History { events }, &Dict::new(), 5);
        assert!(matches!(r, Err(BenchError::CheckTimeout(5))));
    }

    #[test]
    fn recorded_single_thread_history_passes() {
        let cfg = LincheckConfig { threads: 1, ops_per_thread: 12, ..Default::default() };
        for seed in 0..20 {
            assert!(record_and_check(&LincheckConfig { seed, ..cfg.clone() }).unwrap().is_linearizable());
        }
    }

    #[test]
    fn spread_keys_have_distinct_prefixes() {
        let p: Vec<String> = (0..8).map(|i| Prefix::of(spread_key(i), 3).to_string()).collect();
        assert_eq!(p, ["000", "001", "010", "011", "100", "101", "110", "111"]);
    }
}
