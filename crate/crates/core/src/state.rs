//! Shared records: bucket states, buckets, directory snapshots and the
//! announcement array.
//!
//! `BState` and `DState` objects are private while being built and
//! immutable once published; every change produces a fresh object that is
//! swapped in with a single compare-and-swap.

use std::sync::atomic::{fence, AtomicPtr, AtomicU64, Ordering};

use crate::key::{HashFn, Prefix};

pub(crate) const CANARY_LIVE: u64 = 0x5eed_cafe_f00d_0001;
pub(crate) const CANARY_POISON: u64 = 0xdead_beef_dead_beef;

/// Result of an operation as recorded in a bucket's result slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub(crate) enum SlotOutcome {
    None = 0,
    Inserted = 1,
    Updated = 2,
    Deleted = 3,
    Absent = 4,
    Froze = 5,
    Merged = 6,
    Unfrozen = 7,
}

impl SlotOutcome {
    fn from_bits(bits: u64) -> Self {
        match bits {
            1 => SlotOutcome::Inserted,
            2 => SlotOutcome::Updated,
            3 => SlotOutcome::Deleted,
            4 => SlotOutcome::Absent,
            5 => SlotOutcome::Froze,
            6 => SlotOutcome::Merged,
            7 => SlotOutcome::Unfrozen,
            _ => SlotOutcome::None,
        }
    }
}

/// A result slot packed in one word: `seqnum << 4 | outcome`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub(crate) struct ResultSlot(u64);

impl ResultSlot {
    pub(crate) fn new(seq: u64, outcome: SlotOutcome) -> Self {
        debug_assert!(seq < 1 << 60);
        ResultSlot((seq << 4) | outcome as u64)
    }

    pub(crate) fn seq(self) -> u64 {
        self.0 >> 4
    }

    pub(crate) fn outcome(self) -> SlotOutcome {
        SlotOutcome::from_bits(self.0 & 0xf)
    }
}

/// Identifies the merge request that froze a bucket.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct FreezeTag {
    pub tid: u32,
    pub seq: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub(crate) struct Item {
    pub key: u64,
    pub value: u64,
}

/// Contents of a bucket.
pub(crate) struct BState {
    pub canary: AtomicU64,
    pub count: usize,
    pub frozen: Option<FreezeTag>,
    pub items: Box<[Item]>,
    pub applied: Box<[u64]>,
    pub results: Box<[ResultSlot]>,
}

impl BState {
    pub fn new(capacity: usize, threads: usize) -> Self {
        BState {
            canary: AtomicU64::new(CANARY_LIVE),
            count: 0,
            frozen: None,
            items: vec![Item::default(); capacity].into_boxed_slice(),
            applied: vec![0; words_for(threads)].into_boxed_slice(),
            results: vec![ResultSlot::default(); threads].into_boxed_slice(),
        }
    }

    /// Overwrites `self` with the contents of `src` (same capacity and thread count).
    pub fn copy_from(&mut self, src: &BState) {
        self.count = src.count;
        self.frozen = src.frozen;
        self.items[..src.count].copy_from_slice(&src.items[..src.count]);
        self.applied.copy_from_slice(&src.applied);
        self.results.copy_from_slice(&src.results);
    }

    /// Resets to an empty, unfrozen state with no results.
    pub fn clear(&mut self) {
        self.count = 0;
        self.frozen = None;
        self.applied.fill(0);
        self.results.fill(ResultSlot::default());
    }

    pub fn is_full(&self) -> bool {
        self.count == self.items.len()
    }

    pub fn items(&self) -> &[Item] {
        &self.items[..self.count]
    }

    pub fn find(&self, key: u64) -> Option<usize> {
        self.items().iter().position(|it| it.key == key)
    }

    pub fn get(&self, key: u64) -> Option<u64> {
        self.find(key).map(|i| self.items[i].value)
    }

    pub fn push(&mut self, item: Item) {
        debug_assert!(!self.is_full());
        self.items[self.count] = item;
        self.count += 1;
    }

    /// Removes the item at `idx`, moving the last item into its place.
    pub fn swap_remove(&mut self, idx: usize) {
        debug_assert!(idx < self.count);
        self.count -= 1;
        self.items[idx] = self.items[self.count];
    }

    pub fn is_live(&self) -> bool {
        self.canary.load(Ordering::Relaxed) == CANARY_LIVE
    }
}

pub(crate) fn words_for(threads: usize) -> usize {
    threads.div_ceil(64)
}

#[inline]
pub(crate) fn bit(words: &[u64], j: usize) -> bool {
    (words[j / 64] >> (j % 64)) & 1 == 1
}

/// Long-lived bucket identity. Its state pointer moves forward while the
/// bucket is neither full nor frozen; afterwards it never changes again.
pub(crate) struct Bucket {
    pub canary: AtomicU64,
    pub prefix: Prefix,
    pub toggle: Box<[AtomicU64]>,
    pub state: AtomicPtr<BState>,
}

impl Bucket {
    pub fn new(prefix: Prefix, state: *mut BState, threads: usize) -> Self {
        Bucket {
            canary: AtomicU64::new(CANARY_LIVE),
            prefix,
            toggle: (0..words_for(threads)).map(|_| AtomicU64::new(0)).collect(),
            state: AtomicPtr::new(state),
        }
    }

    pub fn depth(&self) -> u8 {
        self.prefix.len()
    }

    /// Flips bit `tid` of the toggle vector. Only thread `tid` writes its
    /// bit, so it can read it first and use a plain atomic add.
    pub fn flip_toggle(&self, tid: usize) {
        let word = &self.toggle[tid / 64];
        let weight = 1u64 << (tid % 64);
        if word.load(Ordering::Relaxed) & weight == 0 {
            word.fetch_add(weight, Ordering::SeqCst);
        } else {
            word.fetch_sub(weight, Ordering::SeqCst);
        }
    }

    pub fn read_toggle(&self, out: &mut [u64]) {
        for (o, w) in out.iter_mut().zip(self.toggle.iter()) {
            *o = w.load(Ordering::SeqCst);
        }
    }

    pub fn load_state(&self) -> *mut BState {
        self.state.load(Ordering::SeqCst)
    }

    pub fn is_live(&self) -> bool {
        self.canary.load(Ordering::Relaxed) == CANARY_LIVE
    }
}

/// Directory snapshot: `2^depth` bucket references, indexed by the leading
/// `depth` bits of a key's hash.
pub(crate) struct DState {
    pub canary: AtomicU64,
    pub depth: u8,
    pub dir: Vec<*mut Bucket>,
}

impl DState {
    pub fn new(depth: u8, dir: Vec<*mut Bucket>) -> Self {
        debug_assert_eq!(dir.len(), 1usize << depth);
        DState { canary: AtomicU64::new(CANARY_LIVE), depth, dir }
    }

    #[inline]
    pub fn index_of(&self, hash: u64) -> usize {
        crate::key::top_bits(hash, self.depth) as usize
    }

    #[inline]
    pub fn route(&self, hash: u64) -> *mut Bucket {
        self.dir[self.index_of(hash)]
    }

    pub fn is_live(&self) -> bool {
        self.canary.load(Ordering::Relaxed) == CANARY_LIVE
    }

    pub fn heap_bytes(&self) -> usize {
        self.dir.capacity() * std::mem::size_of::<*mut Bucket>()
    }

    /// Distinct buckets in directory order.
    pub fn buckets(&self) -> Vec<*mut Bucket> {
        let mut out: Vec<*mut Bucket> = Vec::new();
        for &b in &self.dir {
            if out.last() != Some(&b) {
                out.push(b);
            }
        }
        out
    }
}

/// Kind of an announced operation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum OpKind {
    Nop,
    Insert,
    Delete,
    /// Freeze every bucket under a parent prefix, then merge them.
    /// `key` holds the left-aligned parent prefix.
    Merge { depth: u8 },
    /// Undo the freezes of the merge announced with sequence number `value`.
    Unfreeze { depth: u8 },
}

impl OpKind {
    fn encode(self) -> u64 {
        match self {
            OpKind::Nop => 0,
            OpKind::Insert => 1,
            OpKind::Delete => 2,
            OpKind::Merge { depth } => 3 | (depth as u64) << 8,
            OpKind::Unfreeze { depth } => 4 | (depth as u64) << 8,
        }
    }

    fn decode(word: u64) -> Self {
        let depth = (word >> 8) as u8;
        match word & 0xff {
            1 => OpKind::Insert,
            2 => OpKind::Delete,
            3 => OpKind::Merge { depth },
            4 => OpKind::Unfreeze { depth },
            _ => OpKind::Nop,
        }
    }
}

/// An operation announced in the help array.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct OpRecord {
    pub kind: OpKind,
    pub key: u64,
    pub value: u64,
    pub seq: u64,
}

impl OpRecord {
    /// Parent prefix of a merge or unfreeze request.
    pub fn parent(&self) -> Prefix {
        match self.kind {
            OpKind::Merge { depth } | OpKind::Unfreeze { depth } => Prefix::of(self.key, depth),
            _ => Prefix::default(),
        }
    }

    /// Whether this operation is to be executed on the bucket with `prefix`.
    pub fn targets(&self, prefix: Prefix, hash: HashFn) -> bool {
        match self.kind {
            OpKind::Insert | OpKind::Delete => prefix.covers(hash.hash(self.key)),
            OpKind::Merge { depth } => prefix.len() > depth && prefix.starts_with(self.parent()),
            OpKind::Nop | OpKind::Unfreeze { .. } => false,
        }
    }
}

const WRITING: u64 = 1 << 63;

/// One thread's announcement slot. Only its owner writes it; readers
/// validate with the sequence word, seqlock style. A reader that observes
/// a change simply skips the slot: the owner only re-announces once its
/// previous operation has completed.
#[repr(align(128))]
pub(crate) struct HelpSlot {
    seq: AtomicU64,
    kind: AtomicU64,
    key: AtomicU64,
    value: AtomicU64,
}

impl HelpSlot {
    pub fn new() -> Self {
        HelpSlot {
            seq: AtomicU64::new(0),
            kind: AtomicU64::new(0),
            key: AtomicU64::new(0),
            value: AtomicU64::new(0),
        }
    }

    pub fn announce(&self, op: &OpRecord) {
        debug_assert!(op.seq & WRITING == 0);
        self.seq.store(op.seq | WRITING, Ordering::Relaxed);
        fence(Ordering::Release);
        self.kind.store(op.kind.encode(), Ordering::Relaxed);
        self.key.store(op.key, Ordering::Relaxed);
        self.value.store(op.value, Ordering::Relaxed);
        self.seq.store(op.seq, Ordering::SeqCst);
    }

    /// A consistent copy of the announced record, or `None` if nothing is
    /// announced or the owner is replacing it.
    pub fn read(&self) -> Option<OpRecord> {
        let s1 = self.seq.load(Ordering::SeqCst);
        if s1 == 0 || s1 & WRITING != 0 {
            return None;
        }
        let kind = self.kind.load(Ordering::Relaxed);
        let key = self.key.load(Ordering::Relaxed);
        let value = self.value.load(Ordering::Relaxed);
        fence(Ordering::Acquire);
        let s2 = self.seq.load(Ordering::Relaxed);
        if s1 != s2 {
            return None;
        }
        Some(OpRecord { kind: OpKind::decode(kind), key, value, seq: s1 })
    }
}
