//! A wait-free resizable hash table based on extendible hashing.
//!
//! Keys are routed by the leading bits of their hash through a directory of
//! `2^depth` entries. Buckets hold a bounded number of items; a full bucket
//! is split in two, doubling the directory when the split bucket was as deep
//! as the directory. All updates, splits and directory doublings are
//! wait-free: each thread announces its operation, and threads that touch the
//! same bucket or resize the directory execute each other's pending work.
//!
//! ```
//! use wfext::{HashFn, HashTable, Outcome};
//!
//! let table = HashTable::new(2, 4, HashFn::Mix, 1).unwrap();
//! let mut ctx = table.register().unwrap();
//! assert_eq!(ctx.insert(7, 70).unwrap(), Outcome::Inserted);
//! assert_eq!(ctx.lookup(7), Some(70));
//! assert_eq!(ctx.delete(7).unwrap(), Outcome::Deleted);
//! ```

mod baseline;
mod config;
mod error;
mod hooks;
mod key;
mod layout;
mod merge;
mod reclaim;
mod resize;
mod state;
mod table;

pub use baseline::LockTable;
pub use config::{
    Config, Fault, ReclaimMode, DEFAULT_BATCH, DEFAULT_BUCKET_CAPACITY, DEFAULT_HEAP_BATCHES,
    DEFAULT_MAX_DEPTH, DEPTH_LIMIT,
};
pub use error::{Error, Result};
pub use hooks::Hooks;
pub use key::{key_from_bits, HashFn, ParsePrefixError, Prefix};
pub use layout::{BucketSnapshot, TableSnapshot};
pub use merge::MergeOutcome;
pub use reclaim::ReclaimStats;
pub use table::{HashTable, OpStats, Outcome, ThreadContext};
