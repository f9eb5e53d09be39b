//! The hash table object, thread registration, lookups and the per-bucket
//! update path.
//!
//! An update announces itself in the caller's slot of the help array, flips
//! the caller's bit in the target bucket's toggle vector, then makes at most
//! two attempts to install a fresh copy of the bucket state in which every
//! pending operation on that bucket has been executed. If both attempts lose
//! their CAS, some other thread has executed the operation on the caller's
//! behalf.

use std::cell::Cell;
use std::marker::PhantomData;
use std::sync::atomic::{AtomicBool, AtomicPtr, AtomicU64, Ordering};
use std::sync::Mutex;

use crate::config::{Config, Fault};
use crate::error::{Error, Result};
use crate::key::{HashFn, Prefix};
use crate::layout::{BucketSnapshot, TableSnapshot};
use crate::reclaim::{free_bucket, EpochSlots, Garbage, LocalReclaim, Padded, ReclaimStats};
use crate::state::{
    bit, BState, Bucket, DState, HelpSlot, Item, OpKind, OpRecord, ResultSlot, SlotOutcome,
};

/// Result of an insert or delete.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Outcome {
    /// The key was absent and has been added.
    Inserted,
    /// The key was present and its value replaced.
    Updated,
    Deleted,
    /// Delete of a key that was not present.
    Absent,
}

impl Outcome {
    pub(crate) fn from_slot(o: SlotOutcome) -> Self {
        match o {
            SlotOutcome::Inserted => Outcome::Inserted,
            SlotOutcome::Updated => Outcome::Updated,
            SlotOutcome::Deleted => Outcome::Deleted,
            SlotOutcome::Absent => Outcome::Absent,
            other => unreachable!("not an update outcome: {other:?}"),
        }
    }
}

/// Per-thread instrumentation counters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpStats {
    pub inserts: u64,
    pub deletes: u64,
    pub lookups: u64,
    pub apply_calls: u64,
    pub apply_cas_attempts: u64,
    /// Most CAS attempts made by a single per-bucket apply call.
    pub apply_max_cas: u64,
    /// Apply calls that returned without finding their result (must stay 0).
    pub apply_unresolved: u64,
    pub resize_calls: u64,
    pub resize_publish_attempts: u64,
    /// Most directory CAS attempts made by a single resize call.
    pub resize_max_publish: u64,
    pub directory_publishes: u64,
    pub pending_resize_calls: u64,
    /// Most pending-resize executions within one resize call.
    pub max_pending_resize_per_resize: u64,
    pub splits: u64,
    pub doublings: u64,
    /// Operations of other threads executed by this thread.
    pub helped: u64,
    /// Most announce/apply rounds needed by one update.
    pub update_max_rounds: u64,
    pub merges: u64,
    pub merge_failures: u64,
    pub unfreezes: u64,
}

impl OpStats {
    pub fn absorb(&mut self, o: &OpStats) {
        self.inserts += o.inserts;
        self.deletes += o.deletes;
        self.lookups += o.lookups;
        self.apply_calls += o.apply_calls;
        self.apply_cas_attempts += o.apply_cas_attempts;
        self.apply_max_cas = self.apply_max_cas.max(o.apply_max_cas);
        self.apply_unresolved += o.apply_unresolved;
        self.resize_calls += o.resize_calls;
        self.resize_publish_attempts += o.resize_publish_attempts;
        self.resize_max_publish = self.resize_max_publish.max(o.resize_max_publish);
        self.directory_publishes += o.directory_publishes;
        self.pending_resize_calls += o.pending_resize_calls;
        self.max_pending_resize_per_resize =
            self.max_pending_resize_per_resize.max(o.max_pending_resize_per_resize);
        self.splits += o.splits;
        self.doublings += o.doublings;
        self.helped += o.helped;
        self.update_max_rounds = self.update_max_rounds.max(o.update_max_rounds);
        self.merges += o.merges;
        self.merge_failures += o.merge_failures;
        self.unfreezes += o.unfreezes;
    }
}

fn absorb_reclaim(acc: &mut ReclaimStats, o: &ReclaimStats) {
    acc.retired += o.retired;
    acc.reclaimed += o.reclaimed;
    acc.scans += o.scans;
    acc.heap_hits += o.heap_hits;
    acc.heap_misses += o.heap_misses;
    acc.yields += o.yields;
    acc.pending_max = acc.pending_max.max(o.pending_max);
}

#[derive(Default)]
struct Registration {
    in_use: AtomicBool,
    last_seq: AtomicU64,
}

/// Wait-free resizable extendible hash table mapping `u64` keys to `u64` values.
///
/// Updates go through a registered [`ThreadContext`]; at most
/// `Config::threads` contexts exist at a time.
pub struct HashTable {
    pub(crate) ht: AtomicPtr<DState>,
    pub(crate) help: Box<[HelpSlot]>,
    pub(crate) cfg: Config,
    registry: Box<[Padded<Registration>]>,
    pub(crate) epochs: EpochSlots,
    orphans: Mutex<Vec<Garbage>>,
    stats: Mutex<OpStats>,
    reclaim_stats: Mutex<ReclaimStats>,
    poison_hits: AtomicU64,
}

unsafe impl Send for HashTable {}
unsafe impl Sync for HashTable {}

impl HashTable {
    /// A table for `threads` threads with buckets of `bucket_capacity` items
    /// and `2^initial_depth` initial buckets.
    pub fn new(threads: usize, bucket_capacity: usize, hash: HashFn, initial_depth: u8) -> Result<Self> {
        Self::with_config(Config::new(threads, bucket_capacity).hash(hash).initial_depth(initial_depth))
    }

    pub fn with_config(cfg: Config) -> Result<Self> {
        cfg.validate()?;
        let depth = cfg.initial_depth;
        let layout: Vec<(Prefix, Vec<(u64, u64)>)> =
            (0..1u64 << depth).map(|i| (Prefix::new(i, depth), Vec::new())).collect();
        Self::from_layout(cfg, depth, &layout)
    }

    /// Builds a table in a given state: a directory of `depth` and the listed
    /// buckets, which must tile the directory.
    pub fn from_layout(cfg: Config, depth: u8, buckets: &[(Prefix, Vec<(u64, u64)>)]) -> Result<Self> {
        cfg.validate()?;
        let bad = |m: String| Err(Error::InvalidLayout(m));
        if depth == 0 || depth > cfg.max_depth {
            return bad(format!("directory depth {depth} outside 1..={}", cfg.max_depth));
        }
        let n = cfg.threads;
        let b = cfg.bucket_capacity;
        let mut dir: Vec<*mut Bucket> = vec![std::ptr::null_mut(); 1 << depth];
        let mut made: Vec<*mut Bucket> = Vec::new();
        let cleanup = |made: &[*mut Bucket]| {
            for &p in made {
                unsafe { free_bucket(p) };
            }
        };
        for (prefix, items) in buckets {
            let check = if prefix.is_empty() || prefix.len() > depth {
                Err(format!("bucket {prefix} has depth outside 1..={depth}"))
            } else if items.len() > b {
                Err(format!("bucket {prefix} holds {} items, capacity is {b}", items.len()))
            } else if let Some((k, _)) = items.iter().find(|(k, _)| !prefix.covers(cfg.hash.hash(*k))) {
                Err(format!("key {k:#x} does not belong in bucket {prefix}"))
            } else if prefix.dir_range(depth).any(|i| !dir[i].is_null()) {
                Err(format!("bucket {prefix} overlaps another bucket"))
            } else {
                Ok(())
            };
            if let Err(m) = check {
                cleanup(&made);
                return bad(m);
            }
            let mut st = BState::new(b, n);
            for &(key, value) in items {
                if st.find(key).is_some() {
                    cleanup(&made);
                    return bad(format!("duplicate key {key:#x}"));
                }
                st.push(Item { key, value });
            }
            let bucket = Box::into_raw(Box::new(Bucket::new(*prefix, Box::into_raw(Box::new(st)), n)));
            made.push(bucket);
            for i in prefix.dir_range(depth) {
                dir[i] = bucket;
            }
        }
        if dir.iter().any(|p| p.is_null()) {
            cleanup(&made);
            return bad("buckets do not cover the whole directory".into());
        }
        let d = Box::into_raw(Box::new(DState::new(depth, dir)));
        Ok(HashTable {
            ht: AtomicPtr::new(d),
            help: (0..n).map(|_| HelpSlot::new()).collect(),
            registry: (0..n).map(|_| Padded::default()).collect(),
            epochs: EpochSlots::new(n),
            orphans: Mutex::new(Vec::new()),
            stats: Mutex::new(OpStats::default()),
            reclaim_stats: Mutex::new(ReclaimStats::default()),
            poison_hits: AtomicU64::new(0),
            cfg,
        })
    }

    pub fn config(&self) -> &Config {
        &self.cfg
    }

    pub fn threads(&self) -> usize {
        self.cfg.threads
    }

    pub fn bucket_capacity(&self) -> usize {
        self.cfg.bucket_capacity
    }

    /// Registers the calling thread. Fails once `threads` contexts are alive.
    pub fn register(&self) -> Result<ThreadContext<'_>> {
        for (tid, slot) in self.registry.iter().enumerate() {
            if slot.in_use.compare_exchange(false, true, Ordering::AcqRel, Ordering::Relaxed).is_ok() {
                return Ok(ThreadContext {
                    table: self,
                    tid,
                    seq: slot.last_seq.load(Ordering::Acquire),
                    local: LocalReclaim::new(tid, &self.cfg),
                    stats: OpStats::default(),
                    toggle_buf: vec![0; self.cfg.threads.div_ceil(64)],
                    _not_sync: PhantomData,
                });
            }
        }
        Err(Error::RegistryFull(self.cfg.threads))
    }

    /// Looks `key` up without registration. Uses one of a small set of
    /// shared reader slots, so it is lock-free rather than wait-free.
    pub fn lookup(&self, key: u64) -> Option<u64> {
        let slot = self.epochs.claim_guest();
        self.epochs.begin(slot);
        let v = unsafe { self.lookup_unprotected(key) };
        self.epochs.end(slot);
        self.epochs.release_guest(slot);
        v
    }

    /// Caller must be inside an epoch-protected section.
    pub(crate) unsafe fn lookup_unprotected(&self, key: u64) -> Option<u64> {
        let h = self.cfg.hash.hash(key);
        let d = self.load_dir();
        let bucket = self.bucket(d.route(h));
        let st = self.bstate(bucket.load_state());
        st.get(key)
    }

    /// Runs `f` inside a guest-protected section.
    pub(crate) fn with_guest<R>(&self, f: impl FnOnce() -> R) -> R {
        let slot = self.epochs.claim_guest();
        self.epochs.begin(slot);
        let r = f();
        self.epochs.end(slot);
        self.epochs.release_guest(slot);
        r
    }

    /// Prefix of the bucket `key` currently routes to.
    pub fn bucket_prefix_of(&self, key: u64) -> Prefix {
        self.with_guest(|| unsafe {
            let d = self.load_dir();
            self.bucket(d.route(self.cfg.hash.hash(key))).prefix
        })
    }

    /// Sequence number recorded for thread `tid` in the state of the bucket
    /// `key` currently routes to.
    pub fn result_seqnum(&self, key: u64, tid: usize) -> u64 {
        self.with_guest(|| unsafe {
            let d = self.load_dir();
            let st = self.bstate(self.bucket(d.route(self.cfg.hash.hash(key))).load_state());
            st.results[tid].seq()
        })
    }

    pub fn depth(&self) -> u8 {
        self.with_guest(|| unsafe { self.load_dir().depth })
    }

    /// A copy of the directory and all bucket contents.
    ///
    /// Buckets are read one at a time, so under concurrent updates the copy
    /// is only consistent per bucket.
    pub fn snapshot(&self) -> TableSnapshot {
        self.with_guest(|| unsafe {
            let d = self.load_dir();
            let mut index: std::collections::HashMap<*mut Bucket, usize> = Default::default();
            let mut buckets = Vec::new();
            let mut dir = Vec::with_capacity(d.dir.len());
            for &bp in &d.dir {
                let idx = *index.entry(bp).or_insert_with(|| {
                    let b = self.bucket(bp);
                    let st = self.bstate(b.load_state());
                    buckets.push(BucketSnapshot {
                        prefix: b.prefix,
                        items: st.items().iter().map(|it| (it.key, it.value)).collect(),
                        frozen: st.frozen.is_some(),
                        results: st.results.iter().map(|r| r.seq()).collect(),
                    });
                    buckets.len() - 1
                });
                dir.push(idx);
            }
            TableSnapshot { depth: d.depth, buckets, dir }
        })
    }

    /// Checks directory and bucket invariants on a fresh snapshot.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        self.snapshot().check_invariants(self.cfg.hash, self.cfg.bucket_capacity)
    }

    /// Instrumentation accumulated by contexts that have been dropped.
    pub fn stats(&self) -> OpStats {
        *self.stats.lock().unwrap()
    }

    /// Reclamation counters accumulated by contexts that have been dropped.
    pub fn reclaim_stats(&self) -> ReclaimStats {
        *self.reclaim_stats.lock().unwrap()
    }

    /// Accesses to poisoned (reclaimed) objects detected so far.
    pub fn poison_hits(&self) -> u64 {
        self.poison_hits.load(Ordering::Relaxed)
    }

    /// Retired-but-unreclaimed objects across live contexts.
    pub fn pending_reclaim(&self) -> u64 {
        self.epochs.total_pending()
    }

    /// Largest total of retired-but-unreclaimed objects observed when a batch was sealed.
    pub fn pending_reclaim_high_water(&self) -> u64 {
        self.epochs.pending_high_water()
    }

    #[inline]
    pub(crate) unsafe fn load_dir<'a>(&self) -> &'a DState {
        self.dstate(self.ht.load(Ordering::SeqCst))
    }

    #[inline]
    pub(crate) unsafe fn dstate<'a>(&self, p: *mut DState) -> &'a DState {
        let d = &*p;
        if self.cfg.poison && !d.is_live() {
            self.poison_hits.fetch_add(1, Ordering::Relaxed);
        }
        d
    }

    #[inline]
    pub(crate) unsafe fn bucket<'a>(&self, p: *mut Bucket) -> &'a Bucket {
        let b = &*p;
        if self.cfg.poison && !b.is_live() {
            self.poison_hits.fetch_add(1, Ordering::Relaxed);
        }
        b
    }

    #[inline]
    pub(crate) unsafe fn bstate<'a>(&self, p: *mut BState) -> &'a BState {
        let s = &*p;
        if self.cfg.poison && !s.is_live() {
            self.poison_hits.fetch_add(1, Ordering::Relaxed);
        }
        s
    }

    pub(crate) fn hash(&self, key: u64) -> u64 {
        self.cfg.hash.hash(key)
    }

    pub(crate) fn guard_enabled(&self) -> bool {
        self.cfg.fault != Fault::SkipSeqnumGuard
    }
}

impl Drop for HashTable {
    fn drop(&mut self) {
        unsafe {
            let d = Box::from_raw(*self.ht.get_mut());
            for b in d.buckets() {
                free_bucket(b);
            }
            for g in self.orphans.get_mut().unwrap().drain(..) {
                g.free();
            }
        }
    }
}

/// Outcome of one per-bucket apply call.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Apply {
    Done(SlotOutcome),
    Full,
    Frozen,
    /// Neither applied nor blocked. Cannot happen if helping works.
    Lost,
}

/// Result of sequentially executing one operation on a private state copy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Exec {
    Done(SlotOutcome),
    Full,
    Frozen,
    Skip,
}

/// Executes `op` (announced by thread `owner`) on a private copy of a
/// published bucket state. A full state is never modified: its bucket is
/// immutable and must be split first.
pub(crate) fn exec_on_bucket(local: &mut BState, op: &OpRecord, owner: usize) -> Exec {
    if local.is_full() && local.frozen.is_none() && !matches!(op.kind, OpKind::Nop | OpKind::Unfreeze { .. }) {
        return Exec::Full;
    }
    exec_unpublished(local, op, owner)
}

/// Executes `op` on the state of a bucket that has never been published.
/// Such a bucket may be full; only an insert of a new key needs room.
pub(crate) fn exec_unpublished(local: &mut BState, op: &OpRecord, owner: usize) -> Exec {
    if local.frozen.is_some() {
        return Exec::Frozen;
    }
    if matches!(op.kind, OpKind::Nop | OpKind::Unfreeze { .. }) {
        return Exec::Skip;
    }
    match op.kind {
        OpKind::Insert => match local.find(op.key) {
            Some(i) => {
                local.items[i].value = op.value;
                Exec::Done(SlotOutcome::Updated)
            }
            None if local.is_full() => Exec::Full,
            None => {
                local.push(Item { key: op.key, value: op.value });
                Exec::Done(SlotOutcome::Inserted)
            }
        },
        OpKind::Delete => match local.find(op.key) {
            Some(i) => {
                local.swap_remove(i);
                Exec::Done(SlotOutcome::Deleted)
            }
            None => Exec::Done(SlotOutcome::Absent),
        },
        OpKind::Merge { .. } => {
            local.frozen = Some(crate::state::FreezeTag { tid: owner as u32, seq: op.seq });
            Exec::Done(SlotOutcome::Froze)
        }
        OpKind::Nop | OpKind::Unfreeze { .. } => Exec::Skip,
    }
}

/// A registered thread's handle on a [`HashTable`].
///
/// Holds the thread's id, its private sequence number, its reclamation
/// batches and block heap. Not shareable between threads.
pub struct ThreadContext<'t> {
    pub(crate) table: &'t HashTable,
    pub(crate) tid: usize,
    pub(crate) seq: u64,
    pub(crate) local: LocalReclaim,
    pub(crate) stats: OpStats,
    toggle_buf: Vec<u64>,
    _not_sync: PhantomData<Cell<()>>,
}

unsafe impl Send for ThreadContext<'_> {}

impl<'t> ThreadContext<'t> {
    pub fn tid(&self) -> usize {
        self.tid
    }

    /// Sequence number of the most recently announced operation.
    pub fn seqnum(&self) -> u64 {
        self.seq
    }

    pub fn table(&self) -> &'t HashTable {
        self.table
    }

    pub fn stats(&self) -> OpStats {
        self.stats
    }

    pub fn reclaim_stats(&self) -> ReclaimStats {
        self.local.stats
    }

    /// This thread's epoch counter.
    pub fn epoch_counter(&self) -> u64 {
        self.table.epochs.counter(self.tid)
    }

    /// Blocks currently cached in this thread's heap.
    pub fn heap_len(&self) -> usize {
        self.local.heap_len()
    }

    /// Forces a reclamation pass over this thread's sealed batches.
    pub fn scan_and_reclaim(&mut self) -> usize {
        self.local.scan_and_reclaim(&self.table.epochs)
    }

    pub fn lookup(&mut self, key: u64) -> Option<u64> {
        let t = self.table;
        t.epochs.begin(self.tid);
        let v = unsafe { t.lookup_unprotected(key) };
        t.epochs.end(self.tid);
        self.stats.lookups += 1;
        v
    }

    /// Inserts or replaces `key`. Returns [`Outcome::Inserted`] or [`Outcome::Updated`].
    pub fn insert(&mut self, key: u64, value: u64) -> Result<Outcome> {
        self.stats.inserts += 1;
        self.update(OpKind::Insert, key, value).map(Outcome::from_slot)
    }

    /// Removes `key`. Returns [`Outcome::Deleted`] or [`Outcome::Absent`].
    pub fn delete(&mut self, key: u64) -> Result<Outcome> {
        self.stats.deletes += 1;
        let r = self.update(OpKind::Delete, key, 0).map(Outcome::from_slot);
        if self.table.cfg.auto_merge && r == Ok(Outcome::Deleted) {
            self.maybe_auto_merge(key);
        }
        r
    }

    pub(crate) fn announce(&mut self, kind: OpKind, key: u64, value: u64) -> OpRecord {
        self.seq += 1;
        let op = OpRecord { kind, key, value, seq: self.seq };
        self.table.help[self.tid].announce(&op);
        op
    }

    /// Replaces the current announcement with a no-op.
    pub(crate) fn retract(&mut self) {
        self.announce(OpKind::Nop, 0, 0);
    }

    pub(crate) fn own_result(&self, st: &BState, seq: u64) -> Option<SlotOutcome> {
        let r = st.results[self.tid];
        (r.seq() == seq).then(|| r.outcome())
    }

    fn update(&mut self, kind: OpKind, key: u64, value: u64) -> Result<SlotOutcome> {
        let t = self.table;
        t.epochs.begin(self.tid);
        let op = self.announce(kind, key, value);
        let h = t.hash(key);
        let mut rounds = 0u64;
        let res = loop {
            rounds += 1;
            let bucket = unsafe { t.bucket(t.load_dir().route(h)) };
            let st = unsafe { t.bstate(bucket.load_state()) };
            if let Some(o) = self.own_result(st, op.seq) {
                break Ok(o);
            }
            match self.apply_wf_op(bucket, &op) {
                Apply::Done(o) => break Ok(o),
                Apply::Full => {
                    if let Err(e) = self.resize_wf() {
                        break Err(e);
                    }
                }
                Apply::Frozen => {
                    // A merge holds the bucket; help it, and give the merging
                    // thread a chance to finish freezing if it cannot be helped yet.
                    let _ = self.resize_wf();
                    if rounds > 2 {
                        std::thread::yield_now();
                    }
                }
                Apply::Lost => self.stats.apply_unresolved += 1,
            }
        };
        if res.is_err() {
            self.retract();
        }
        self.stats.update_max_rounds = self.stats.update_max_rounds.max(rounds);
        t.epochs.end(self.tid);
        self.local.relieve(&t.epochs);
        res
    }

    /// Applies the caller's announced operation `op` to `bucket`, combining
    /// it with every other pending operation on that bucket.
    pub(crate) fn apply_wf_op(&mut self, bucket: &Bucket, op: &OpRecord) -> Apply {
        let t = self.table;
        self.stats.apply_calls += 1;
        bucket.flip_toggle(self.tid);
        if let Some(h) = &t.cfg.hooks {
            h.after_toggle_flip(self.tid, op.seq, bucket.prefix);
        }
        let mut attempts = 0u64;
        let result = 'attempts: {
            for _ in 0..2 {
                let old_p = bucket.load_state();
                let old = unsafe { t.bstate(old_p) };
                if let Some(o) = self.own_result(old, op.seq) {
                    break 'attempts Apply::Done(o);
                }
                if old.frozen.is_some() {
                    break 'attempts Apply::Frozen;
                }
                if old.is_full() {
                    break 'attempts Apply::Full;
                }
                bucket.read_toggle(&mut self.toggle_buf);
                let new_p = self.local.alloc_bstate();
                let new = unsafe { &mut *new_p };
                new.copy_from(old);
                self.combine(bucket, new);
                new.applied.copy_from_slice(&self.toggle_buf);
                if let Some(h) = &t.cfg.hooks {
                    h.before_state_cas(self.tid, bucket.prefix);
                }
                attempts += 1;
                if bucket
                    .state
                    .compare_exchange(old_p, new_p, Ordering::SeqCst, Ordering::SeqCst)
                    .is_ok()
                {
                    self.local.retire(Garbage::State(old_p), &t.epochs);
                    break 'attempts self.classify(new, op.seq);
                }
                unsafe { self.local.free_private_bstate(new_p) };
            }
            let st = unsafe { t.bstate(bucket.load_state()) };
            self.classify(st, op.seq)
        };
        self.stats.apply_cas_attempts += attempts;
        self.stats.apply_max_cas = self.stats.apply_max_cas.max(attempts);
        result
    }

    fn classify(&self, st: &BState, seq: u64) -> Apply {
        if let Some(o) = self.own_result(st, seq) {
            Apply::Done(o)
        } else if st.frozen.is_some() {
            Apply::Frozen
        } else if st.is_full() {
            Apply::Full
        } else {
            Apply::Lost
        }
    }

    /// Executes every pending operation on `bucket` whose toggle bit differs
    /// from the applied bit, scanning threads from `tid + 1` around to `tid`.
    fn combine(&mut self, bucket: &Bucket, new: &mut BState) {
        let t = self.table;
        let n = t.cfg.threads;
        let guard = t.guard_enabled();
        for k in 1..=n {
            let j = (self.tid + k) % n;
            if bit(&self.toggle_buf, j) == bit(&new.applied, j) {
                continue;
            }
            let Some(rec) = t.help[j].read() else { continue };
            if guard && rec.seq <= new.results[j].seq() {
                continue;
            }
            if !rec.targets(bucket.prefix, t.cfg.hash) {
                continue;
            }
            if let Exec::Done(o) = exec_on_bucket(new, &rec, j) {
                new.results[j] = ResultSlot::new(rec.seq, o);
                if j != self.tid {
                    self.stats.helped += 1;
                }
            }
        }
    }

    fn maybe_auto_merge(&mut self, key: u64) {
        let t = self.table;
        let parent = t.with_guest(|| unsafe {
            let d = t.load_dir();
            let b = t.bucket(d.route(t.hash(key)));
            let depth = b.depth();
            if depth < 2 {
                return None;
            }
            let parent = Prefix::new(b.prefix.bits() >> 1, depth - 1);
            if d.depth < depth {
                return None;
            }
            let range = parent.dir_range(d.depth);
            let first = t.bucket(d.dir[range.start]);
            let last = t.bucket(d.dir[range.end - 1]);
            if first.depth() != depth || last.depth() != depth {
                return None;
            }
            let total = t.bstate(first.load_state()).count + t.bstate(last.load_state()).count;
            (total <= t.cfg.bucket_capacity / 2).then_some(parent)
        });
        if let Some(parent) = parent {
            let _ = self.request_merge(parent);
        }
    }
}

impl Drop for ThreadContext<'_> {
    fn drop(&mut self) {
        let t = self.table;
        t.epochs.end(self.tid);
        let rest = self.local.shutdown(&t.epochs);
        t.orphans.lock().unwrap().extend(rest);
        t.stats.lock().unwrap().absorb(&self.stats);
        absorb_reclaim(&mut t.reclaim_stats.lock().unwrap(), &self.local.stats);
        let reg = &t.registry[self.tid];
        reg.last_seq.store(self.seq, Ordering::Release);
        reg.in_use.store(false, Ordering::Release);
    }
}
