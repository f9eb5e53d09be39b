//! Plain-data copies of a table's directory and buckets.

use std::collections::HashSet;
use std::fmt;

use crate::key::{HashFn, Prefix};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BucketSnapshot {
    pub prefix: Prefix,
    /// Items in storage order.
    pub items: Vec<(u64, u64)>,
    pub frozen: bool,
    /// Sequence number in each thread's result slot.
    pub results: Vec<u64>,
}

impl BucketSnapshot {
    pub fn depth(&self) -> u8 {
        self.prefix.len()
    }

    /// Keys in ascending order.
    pub fn keys(&self) -> Vec<u64> {
        let mut k: Vec<u64> = self.items.iter().map(|&(k, _)| k).collect();
        k.sort_unstable();
        k
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TableSnapshot {
    pub depth: u8,
    /// Distinct buckets in directory order.
    pub buckets: Vec<BucketSnapshot>,
    /// For each directory entry, an index into `buckets`.
    pub dir: Vec<usize>,
}

impl TableSnapshot {
    pub fn bucket(&self, prefix: &str) -> Option<&BucketSnapshot> {
        let p: Prefix = prefix.parse().ok()?;
        self.buckets.iter().find(|b| b.prefix == p)
    }

    /// Prefix of the bucket referenced by each directory entry.
    pub fn entry_prefixes(&self) -> Vec<Prefix> {
        self.dir.iter().map(|&i| self.buckets[i].prefix).collect()
    }

    pub fn len(&self) -> usize {
        self.buckets.iter().map(|b| b.items.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All key/value pairs sorted by key.
    pub fn entries(&self) -> Vec<(u64, u64)> {
        let mut all: Vec<(u64, u64)> = self.buckets.iter().flat_map(|b| b.items.iter().copied()).collect();
        all.sort_unstable();
        all
    }

    /// Verifies the structural invariants of an extendible hash table:
    /// directory size, prefix agreement between entries and buckets,
    /// contiguous coverage, capacity and key placement.
    pub fn check_invariants(&self, hash: HashFn, capacity: usize) -> Result<(), String> {
        let depth = self.depth;
        if self.dir.len() != 1usize << depth {
            return Err(format!("directory of depth {depth} has {} entries", self.dir.len()));
        }
        let mut refs = vec![0usize; self.buckets.len()];
        for (e, &i) in self.dir.iter().enumerate() {
            let b = &self.buckets[i];
            if b.depth() > depth || b.depth() == 0 {
                return Err(format!("bucket {} deeper than directory depth {depth}", b.prefix));
            }
            if !b.prefix.dir_range(depth).contains(&e) {
                return Err(format!("entry {e:0w$b} points to bucket {}", b.prefix, w = depth as usize));
            }
            refs[i] += 1;
        }
        let mut seen = HashSet::new();
        for (i, b) in self.buckets.iter().enumerate() {
            let want = 1usize << (depth - b.depth());
            if refs[i] != want {
                return Err(format!("bucket {} referenced {} times, expected {want}", b.prefix, refs[i]));
            }
            if b.items.len() > capacity {
                return Err(format!("bucket {} holds {} items, capacity {capacity}", b.prefix, b.items.len()));
            }
            for &(k, _) in &b.items {
                if !b.prefix.covers(hash.hash(k)) {
                    return Err(format!("key {k:#x} stored in bucket {}", b.prefix));
                }
                if !seen.insert(k) {
                    return Err(format!("key {k:#x} stored twice"));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for TableSnapshot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "depth {}", self.depth)?;
        for b in &self.buckets {
            write!(f, "  {:>8}:", b.prefix.to_string())?;
            for (k, _) in &b.items {
                write!(f, " {k:#x}")?;
            }
            if b.frozen {
                write!(f, " (frozen)")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
