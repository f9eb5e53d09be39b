use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::hooks::Hooks;
use crate::key::HashFn;

/// Hard ceiling for [`Config::max_depth`].
pub const DEPTH_LIMIT: u8 = 48;
pub const DEFAULT_MAX_DEPTH: u8 = 32;
pub const DEFAULT_BUCKET_CAPACITY: usize = 8;
pub const DEFAULT_BATCH: usize = 256;
pub const DEFAULT_HEAP_BATCHES: usize = 8;

/// How retired snapshots are handled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ReclaimMode {
    /// Epoch-based reclamation with thread-local block heaps.
    #[default]
    Epoch,
    /// Never reclaim; retired objects are leaked. Debugging aid.
    Leak,
}

impl std::str::FromStr for ReclaimMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "epoch" => Ok(ReclaimMode::Epoch),
            "leak" => Ok(ReclaimMode::Leak),
            other => Err(Error::InvalidConfig(format!("unknown reclaim mode {other:?}"))),
        }
    }
}

/// Deliberate defects used to check that the test harness can detect them.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Fault {
    #[default]
    None,
    /// Apply announced operations without comparing their sequence number
    /// against the bucket's result slot.
    SkipSeqnumGuard,
}

/// Construction parameters of a [`HashTable`](crate::HashTable).
#[derive(Clone)]
pub struct Config {
    pub threads: usize,
    pub bucket_capacity: usize,
    pub hash: HashFn,
    pub initial_depth: u8,
    pub max_depth: u8,
    pub reclaim: ReclaimMode,
    /// Retirements per batch before counters are checked.
    pub batch: usize,
    /// Capacity of each thread-local block heap, in batches.
    pub heap_batches: usize,
    /// Poison reclaimed objects and count accesses to poisoned ones.
    pub poison: bool,
    /// Halve the directory after a merge when every entry pair coincides.
    pub shrink_on_merge: bool,
    /// Merge sibling buckets after a delete when their combined occupancy
    /// drops to `bucket_capacity / 2` or below.
    pub auto_merge: bool,
    pub hooks: Option<Arc<dyn Hooks>>,
    pub fault: Fault,
}

impl Config {
    pub fn new(threads: usize, bucket_capacity: usize) -> Self {
        Config {
            threads,
            bucket_capacity,
            hash: HashFn::Mix,
            initial_depth: 1,
            max_depth: DEFAULT_MAX_DEPTH,
            reclaim: ReclaimMode::Epoch,
            batch: DEFAULT_BATCH,
            heap_batches: DEFAULT_HEAP_BATCHES,
            poison: cfg!(debug_assertions),
            shrink_on_merge: true,
            auto_merge: false,
            hooks: None,
            fault: Fault::None,
        }
    }

    pub fn hash(mut self, hash: HashFn) -> Self {
        self.hash = hash;
        self
    }

    pub fn initial_depth(mut self, depth: u8) -> Self {
        self.initial_depth = depth;
        self
    }

    pub fn max_depth(mut self, depth: u8) -> Self {
        self.max_depth = depth;
        self
    }

    pub fn reclaim(mut self, mode: ReclaimMode) -> Self {
        self.reclaim = mode;
        self
    }

    pub fn batch(mut self, batch: usize) -> Self {
        self.batch = batch;
        self
    }

    pub fn heap_batches(mut self, heap: usize) -> Self {
        self.heap_batches = heap;
        self
    }

    pub fn poison(mut self, on: bool) -> Self {
        self.poison = on;
        self
    }

    pub fn shrink_on_merge(mut self, on: bool) -> Self {
        self.shrink_on_merge = on;
        self
    }

    pub fn auto_merge(mut self, on: bool) -> Self {
        self.auto_merge = on;
        self
    }

    pub fn hooks(mut self, hooks: Arc<dyn Hooks>) -> Self {
        self.hooks = Some(hooks);
        self
    }

    pub fn fault(mut self, fault: Fault) -> Self {
        self.fault = fault;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.threads == 0 {
            return bad("thread count must be at least 1".into());
        }
        if self.bucket_capacity == 0 {
            return bad("bucket capacity must be at least 1".into());
        }
        if self.max_depth == 0 || self.max_depth > DEPTH_LIMIT {
            return bad(format!("max depth must be in 1..={DEPTH_LIMIT}, got {}", self.max_depth));
        }
        if self.initial_depth == 0 || self.initial_depth > self.max_depth {
            return bad(format!(
                "initial depth must be in 1..={}, got {}",
                self.max_depth, self.initial_depth
            ));
        }
        if self.batch == 0 {
            return bad("reclamation batch size must be at least 1".into());
        }
        Ok(())
    }

    pub(crate) fn heap_capacity(&self) -> usize {
        self.batch * self.heap_batches
    }
}

impl fmt::Debug for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Config")
            .field("threads", &self.threads)
            .field("bucket_capacity", &self.bucket_capacity)
            .field("hash", &self.hash)
            .field("initial_depth", &self.initial_depth)
            .field("max_depth", &self.max_depth)
            .field("reclaim", &self.reclaim)
            .field("batch", &self.batch)
            .field("heap_batches", &self.heap_batches)
            .field("poison", &self.poison)
            .field("shrink_on_merge", &self.shrink_on_merge)
            .field("auto_merge", &self.auto_merge)
            .field("hooks", &self.hooks.is_some())
            .field("fault", &self.fault)
            .finish()
    }
}
