//! Fixed-size hash table with one lock per bucket, for comparison.
//!
//! Uses the same hash function and the same leading-bits bucket index as the
//! extendible table, but never resizes; every operation, lookups included,
//! takes the bucket's mutex.

use parking_lot::Mutex;

use crate::key::{top_bits, HashFn};
use crate::table::Outcome;

type Slot = Mutex<Vec<(u64, u64)>>;

pub struct LockTable {
    buckets: Box<[Slot]>,
    depth: u8,
    hash: HashFn,
}

impl LockTable {
    /// A table with `2^depth` buckets.
    pub fn new(depth: u8, hash: HashFn) -> Self {
        assert!((1..=30).contains(&depth), "lock table depth must be in 1..=30");
        LockTable {
            buckets: (0..1usize << depth).map(|_| Mutex::new(Vec::new())).collect(),
            depth,
            hash,
        }
    }

    /// Picks a bucket count of about `expected_keys / per_bucket`, rounded up to a power of two.
    pub fn sized_for(expected_keys: usize, per_bucket: usize, hash: HashFn) -> Self {
        let want = expected_keys.div_ceil(per_bucket.max(1)).max(2);
        let depth = (usize::BITS - (want - 1).leading_zeros()) as u8;
        Self::new(depth.clamp(1, 30), hash)
    }

    pub fn depth(&self) -> u8 {
        self.depth
    }

    fn slot(&self, key: u64) -> &Slot {
        &self.buckets[top_bits(self.hash.hash(key), self.depth) as usize]
    }

    pub fn lookup(&self, key: u64) -> Option<u64> {
        self.slot(key).lock().iter().find(|e| e.0 == key).map(|e| e.1)
    }

    pub fn insert(&self, key: u64, value: u64) -> Outcome {
        let mut b = self.slot(key).lock();
        match b.iter_mut().find(|e| e.0 == key) {
            Some(e) => {
                e.1 = value;
                Outcome::Updated
            }
            None => {
                b.push((key, value));
                Outcome::Inserted
            }
        }
    }

    pub fn delete(&self, key: u64) -> Outcome {
        let mut b = self.slot(key).lock();
        match b.iter().position(|e| e.0 == key) {
            Some(i) => {
                b.swap_remove(i);
                Outcome::Deleted
            }
            None => Outcome::Absent,
        }
    }

    pub fn len(&self) -> usize {
        self.buckets.iter().map(|b| b.lock().len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
