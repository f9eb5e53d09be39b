//! Epoch-based reclamation with thread-local block heaps.
//!
//! Every registered thread owns an activity word: a counter bumped at the
//! start of each table operation, plus a quiescent bit set between
//! operations. Retired objects are collected in thread-local batches; when a
//! batch fills up it is sealed together with a snapshot of all activity
//! words, and sealed batches are released once every thread has either
//! moved on from the operation it was running at seal time or was
//! quiescent then. A thread that finishes an operation with sealed batches
//! still held back yields once before rescanning, so a peer preempted inside
//! an operation can move on instead of pinning every batch for a whole
//! time slice.
//!
//! Released bucket states go to the releasing thread's block heap, which
//! later allocations draw from.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};

use crate::config::{Config, ReclaimMode};
use crate::state::{BState, Bucket, DState, CANARY_LIVE, CANARY_POISON};

/// Sealing threshold for retired directory arrays, which can be large.
pub(crate) const LARGE_BATCH_BYTES: usize = 1 << 20;

/// Number of activity slots reserved for lookups from unregistered threads.
pub(crate) const GUEST_SLOTS: usize = 16;

const QUIESCENT: u64 = 1;

#[repr(align(128))]
#[derive(Default)]
pub(crate) struct Padded<T>(pub T);

impl<T> std::ops::Deref for Padded<T> {
    type Target = T;
    fn deref(&self) -> &T {
        &self.0
    }
}

/// Shared part of the reclaimer: one activity word per registered thread
/// followed by the guest slots. Each word is written only by its owner.
pub(crate) struct EpochSlots {
    words: Box<[Padded<AtomicU64>]>,
    pending: Box<[Padded<AtomicU64>]>,
    guest_claims: Box<[AtomicBool]>,
    threads: usize,
    pending_high_water: AtomicU64,
}

impl EpochSlots {
    pub fn new(threads: usize) -> Self {
        let total = threads + GUEST_SLOTS;
        EpochSlots {
            words: (0..total).map(|_| Padded(AtomicU64::new(QUIESCENT))).collect(),
            pending: (0..threads).map(|_| Padded(AtomicU64::new(0))).collect(),
            guest_claims: (0..GUEST_SLOTS).map(|_| AtomicBool::new(false)).collect(),
            threads,
            pending_high_water: AtomicU64::new(0),
        }
    }

    /// Marks the start of an operation by the owner of `slot`.
    #[inline]
    pub fn begin(&self, slot: usize) {
        let w = &self.words[slot];
        let counter = w.load(Ordering::Relaxed) >> 1;
        w.store((counter + 1) << 1, Ordering::SeqCst);
    }

    /// Marks the owner of `slot` as holding no references.
    #[inline]
    pub fn end(&self, slot: usize) {
        let w = &self.words[slot];
        let word = w.load(Ordering::Relaxed);
        w.store(word | QUIESCENT, Ordering::Release);
    }

    pub fn counter(&self, slot: usize) -> u64 {
        self.words[slot].load(Ordering::SeqCst) >> 1
    }

    #[cfg(test)]
    pub fn is_quiescent(&self, slot: usize) -> bool {
        self.words[slot].load(Ordering::SeqCst) & QUIESCENT != 0
    }

    fn snapshot(&self) -> Box<[u64]> {
        self.words.iter().map(|w| w.load(Ordering::SeqCst)).collect()
    }

    fn released(&self, snap: &[u64]) -> bool {
        snap.iter().zip(self.words.iter()).all(|(&then, now)| {
            then & QUIESCENT != 0 || now.load(Ordering::SeqCst) != then
        })
    }

    /// Claims a guest slot for an unregistered reader.
    pub fn claim_guest(&self) -> usize {
        let start = guest_hint() % GUEST_SLOTS;
        loop {
            for i in 0..GUEST_SLOTS {
                let g = (start + i) % GUEST_SLOTS;
                if self.guest_claims[g]
                    .compare_exchange(false, true, Ordering::Acquire, Ordering::Relaxed)
                    .is_ok()
                {
                    return self.threads + g;
                }
            }
            std::thread::yield_now();
        }
    }

    pub fn release_guest(&self, slot: usize) {
        self.guest_claims[slot - self.threads].store(false, Ordering::Release);
    }

    fn set_pending(&self, tid: usize, n: usize) {
        self.pending[tid].store(n as u64, Ordering::Relaxed);
    }

    /// Retired-but-unreclaimed objects across all threads.
    pub fn total_pending(&self) -> u64 {
        self.pending.iter().map(|p| p.load(Ordering::Relaxed)).sum()
    }

    pub fn pending_high_water(&self) -> u64 {
        self.pending_high_water.load(Ordering::Relaxed)
    }
}

fn guest_hint() -> usize {
    use std::hash::{Hash, Hasher};
    let mut h = std::collections::hash_map::DefaultHasher::new();
    std::thread::current().id().hash(&mut h);
    h.finish() as usize
}

/// An unlinked object waiting for reclamation.
#[derive(Debug)]
pub(crate) enum Garbage {
    State(*mut BState),
    /// A bucket together with its final state.
    Bucket(*mut Bucket),
    Dir(*mut DState),
}

impl Garbage {
    /// Frees the object. Caller guarantees no thread can still reach it.
    pub unsafe fn free(self) {
        match self {
            Garbage::State(p) => drop(Box::from_raw(p)),
            Garbage::Bucket(p) => free_bucket(p),
            Garbage::Dir(p) => drop(Box::from_raw(p)),
        }
    }
}

/// Frees a bucket and, if still attached, its state.
pub(crate) unsafe fn free_bucket(p: *mut Bucket) {
    let b = Box::from_raw(p);
    let s = b.state.load(Ordering::Relaxed);
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

struct Batch {
    items: Vec<Garbage>,
    snapshot: Box<[u64]>,
}

/// Counters of one thread's reclamation activity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ReclaimStats {
    pub retired: u64,
    pub reclaimed: u64,
    pub scans: u64,
    pub heap_hits: u64,
    pub heap_misses: u64,
    /// Time slices given up between operations because sealed batches were stuck.
    pub yields: u64,
    /// Retired objects not yet reclaimed, current value.
    pub pending: u64,
    /// Largest value of `pending` seen by this thread.
    pub pending_max: u64,
}

/// Thread-owned reclamation state.
pub(crate) struct LocalReclaim {
    tid: usize,
    mode: ReclaimMode,
    batch: usize,
    heap_cap: usize,
    poison: bool,
    current: Vec<Garbage>,
    current_bytes: usize,
    quarantine: VecDeque<Batch>,
    heap: Vec<*mut BState>,
    graveyard: Vec<Garbage>,
    bucket_capacity: usize,
    threads: usize,
    pending: usize,
    pub stats: ReclaimStats,
}

impl LocalReclaim {
    pub fn new(tid: usize, cfg: &Config) -> Self {
        LocalReclaim {
            tid,
            mode: cfg.reclaim,
            batch: cfg.batch,
            heap_cap: cfg.heap_capacity(),
            poison: cfg.poison,
            current: Vec::with_capacity(cfg.batch),
            current_bytes: 0,
            quarantine: VecDeque::new(),
            heap: Vec::new(),
            graveyard: Vec::new(),
            bucket_capacity: cfg.bucket_capacity,
            threads: cfg.threads,
            pending: 0,
            stats: ReclaimStats::default(),
        }
    }

    /// A bucket-state block, recycled from the local heap when possible.
    /// The contents are stale and must be overwritten by the caller.
    pub fn alloc_bstate(&mut self) -> *mut BState {
        match self.heap.pop() {
            Some(p) => {
                self.stats.heap_hits += 1;
                unsafe { (*p).canary.store(CANARY_LIVE, Ordering::Relaxed) };
                p
            }
            None => {
                self.stats.heap_misses += 1;
                Box::into_raw(Box::new(BState::new(self.bucket_capacity, self.threads)))
            }
        }
    }

    /// Returns a never-published block straight to the heap.
    pub unsafe fn free_private_bstate(&mut self, p: *mut BState) {
        if self.heap.len() < self.heap_cap {
            self.heap.push(p);
        } else {
            drop(Box::from_raw(p));
        }
    }

    /// Frees a never-published bucket together with its state.
    pub unsafe fn free_private_bucket(&mut self, p: *mut Bucket) {
        let b = Box::from_raw(p);
        let s = b.state.load(Ordering::Relaxed);
        if !s.is_null() {
            self.free_private_bstate(s);
        }
    }

    pub fn heap_len(&self) -> usize {
        self.heap.len()
    }

    #[cfg(test)]
    pub fn pending(&self) -> usize {
        self.pending
    }

    /// Queues an object that was just unlinked by a successful CAS.
    pub fn retire(&mut self, g: Garbage, slots: &EpochSlots) {
        self.stats.retired += 1;
        if self.mode == ReclaimMode::Leak {
            return;
        }
        if let Garbage::Dir(d) = g {
            self.current_bytes += unsafe { (*d).heap_bytes() };
        }
        self.current.push(g);
        self.pending += 1;
        self.note_pending(slots);
        if self.current.len() >= self.batch || self.current_bytes >= LARGE_BATCH_BYTES {
            self.seal(slots);
            self.scan_and_reclaim(slots);
        }
    }

    fn seal(&mut self, slots: &EpochSlots) {
        if self.current.is_empty() {
            return;
        }
        let items = std::mem::replace(&mut self.current, Vec::with_capacity(self.batch));
        self.current_bytes = 0;
        self.quarantine.push_back(Batch { items, snapshot: slots.snapshot() });
        let total = slots.total_pending();
        slots.pending_high_water.fetch_max(total, Ordering::Relaxed);
    }

    /// Releases every sealed batch whose snapshot has been passed by all threads.
    pub fn scan_and_reclaim(&mut self, slots: &EpochSlots) -> usize {
        self.stats.scans += 1;
        let mut reclaimed = 0;
        let mut kept = VecDeque::with_capacity(self.quarantine.len());
        while let Some(batch) = self.quarantine.pop_front() {
            if slots.released(&batch.snapshot) {
                reclaimed += batch.items.len();
                for g in batch.items {
                    unsafe { self.reclaim(g) };
                }
            } else {
                kept.push_back(batch);
            }
        }
        self.quarantine = kept;
        self.pending -= reclaimed;
        self.stats.reclaimed += reclaimed as u64;
        self.note_pending(slots);
        reclaimed
    }

    /// Called between operations, while quiescent. If sealed batches are
    /// piling up because another thread was preempted inside an operation,
    /// gives up the time slice once so it can move on, then scans again.
    pub fn relieve(&mut self, slots: &EpochSlots) {
        if self.quarantine.is_empty() {
            return;
        }
        self.scan_and_reclaim(slots);
        if self.quarantine.is_empty() {
            return;
        }
        self.stats.yields += 1;
        std::thread::yield_now();
        self.scan_and_reclaim(slots);
    }

    fn note_pending(&mut self, slots: &EpochSlots) {
        self.stats.pending = self.pending as u64;
        self.stats.pending_max = self.stats.pending_max.max(self.pending as u64);
        slots.set_pending(self.tid, self.pending);
    }

    unsafe fn reclaim(&mut self, g: Garbage) {
        match g {
            Garbage::State(p) => self.recycle_bstate(p),
            Garbage::Bucket(p) => {
                let s = (*p).state.swap(std::ptr::null_mut(), Ordering::Relaxed);
                if !s.is_null() {
                    self.recycle_bstate(s);
                }
                if self.poison {
                    (*p).canary.store(CANARY_POISON, Ordering::Relaxed);
                    self.graveyard.push(Garbage::Bucket(p));
                } else {
                    free_bucket(p);
                }
            }
            Garbage::Dir(p) => {
                if self.poison {
                    (*p).canary.store(CANARY_POISON, Ordering::Relaxed);
                    // Drop the array; the header stays readable for canary checks.
                    (*p).dir = Vec::new();
                    self.graveyard.push(Garbage::Dir(p));
                } else {
                    drop(Box::from_raw(p));
                }
            }
        }
    }

    unsafe fn recycle_bstate(&mut self, p: *mut BState) {
        if self.poison {
            (*p).canary.store(CANARY_POISON, Ordering::Relaxed);
        }
        if self.heap.len() < self.heap_cap {
            self.heap.push(p);
        } else if self.poison {
            self.graveyard.push(Garbage::State(p));
        } else {
            drop(Box::from_raw(p));
        }
    }

    /// Seals the open batch, reclaims what it can and hands everything else
    /// back to the caller. Heap blocks are freed.
    pub fn shutdown(&mut self, slots: &EpochSlots) -> Vec<Garbage> {
        self.seal(slots);
        self.scan_and_reclaim(slots);
        let mut rest: Vec<Garbage> = Vec::new();
        for batch in self.quarantine.drain(..) {
            rest.extend(batch.items);
        }
        rest.append(&mut self.graveyard);
        for p in self.heap.drain(..) {
            unsafe { drop(Box::from_raw(p)) };
        }
        self.pending = 0;
        slots.set_pending(self.tid, 0);
        rest
    }
}
