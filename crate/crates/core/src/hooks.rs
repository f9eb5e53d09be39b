//! Interposition points for tests that need to force specific interleavings.
//!
//! Every method defaults to a no-op. Hooks run on the thread executing the
//! operation, identified by its registered thread id.

pub trait Hooks: Send + Sync {
    /// Called after the thread flipped its toggle bit on the bucket with
    /// `prefix`, announcing operation `seq`, and before it reads the bucket state.
    fn after_toggle_flip(&self, _tid: usize, _seq: u64, _prefix: crate::Prefix) {}

    /// Called right before the compare-and-swap that publishes a new bucket state.
    fn before_state_cas(&self, _tid: usize, _prefix: crate::Prefix) {}

    /// Called right before the compare-and-swap that publishes a new directory.
    fn before_directory_cas(&self, _tid: usize) {}

    /// Called after a new directory was published by `tid`.
    fn after_directory_publish(&self, _tid: usize) {}
}
