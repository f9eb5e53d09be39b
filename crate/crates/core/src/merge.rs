//! Merging sibling buckets back into their parent.
//!
//! A merge request is announced like any update. The requesting thread first
//! freezes every bucket under the parent prefix, in ascending prefix order,
//! using the ordinary per-bucket apply path. Once all are frozen, any
//! resizing thread can complete the merge: it builds the parent bucket from
//! the frozen contents, links it into a new directory and optionally halves
//! the directory. If freezing fails partway, the requester announces an
//! unfreeze that replaces its frozen buckets with unfrozen copies.

use crate::error::{Error, Result};
use crate::key::Prefix;
use crate::resize::{buckets_under, ResizeWork};
use crate::state::{Bucket, FreezeTag, OpKind, OpRecord, ResultSlot, SlotOutcome};
use crate::table::{Apply, ThreadContext};

/// How a merge request ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MergeOutcome {
    /// The buckets under the parent prefix were replaced by one bucket.
    Merged,
    /// The parent prefix is already covered by a single bucket.
    NothingToMerge,
    /// The combined contents exceed one bucket.
    TooLarge,
    /// A participant was full. Freezes made by this request have been undone.
    Full,
    /// A participant was frozen by a concurrent merge. Freezes made by this
    /// request have been undone.
    Conflict,
}

fn tag_of(m: usize, seq: u64) -> FreezeTag {
    FreezeTag { tid: m as u32, seq }
}

impl ThreadContext<'_> {
    /// Merges every bucket whose prefix extends `parent` into a single bucket
    /// with prefix `parent`.
    pub fn request_merge(&mut self, parent: Prefix) -> Result<MergeOutcome> {
        let t = self.table;
        if parent.is_empty() || parent.len() > t.cfg.max_depth {
            return Err(Error::InvalidConfig(format!(
                "merge parent must have depth 1..={}, got {}",
                t.cfg.max_depth,
                parent.len()
            )));
        }
        t.epochs.begin(self.tid);
        let op = self.announce(OpKind::Merge { depth: parent.len() }, parent.left_aligned(), 0);
        let out = self.run_merge(parent, &op);
        if out != MergeOutcome::Merged {
            self.stats.merge_failures += 1;
            self.retract();
        } else {
            self.stats.merges += 1;
        }
        t.epochs.end(self.tid);
        self.local.relieve(&t.epochs);
        Ok(out)
    }

    fn run_merge(&mut self, parent: Prefix, op: &OpRecord) -> MergeOutcome {
        let t = self.table;
        let participants = unsafe {
            let d = t.load_dir();
            buckets_under(d.depth, &d.dir, parent)
        };
        let Some(&first) = participants.first() else { return MergeOutcome::NothingToMerge };
        if unsafe { (*first).depth() } <= parent.len() {
            return MergeOutcome::NothingToMerge;
        }
        let mut frozen = 0usize;
        let mut total = 0usize;
        let mut failure = None;
        for &p in &participants {
            let bucket = unsafe { t.bucket(p) };
            match self.apply_wf_op(bucket, op) {
                Apply::Done(SlotOutcome::Froze) => {
                    frozen += 1;
                    total += unsafe { t.bstate(bucket.load_state()) }.count;
                }
                Apply::Full => {
                    failure = Some(MergeOutcome::Full);
                    break;
                }
                _ => {
                    failure = Some(MergeOutcome::Conflict);
                    break;
                }
            }
        }
        if failure.is_none() && total > t.cfg.bucket_capacity {
            failure = Some(MergeOutcome::TooLarge);
        }
        if let Some(f) = failure {
            if frozen > 0 {
                self.unfreeze_own(parent, op.seq);
            }
            return f;
        }
        // Every participant is frozen; the merge itself is ordinary resize work.
        for _ in 0..4 {
            if self.merge_complete_now(parent, op.seq) {
                return MergeOutcome::Merged;
            }
            let _ = self.resize_wf();
        }
        debug_assert!(self.merge_complete_now(parent, op.seq), "merge did not complete");
        MergeOutcome::Merged
    }

    fn merge_complete_now(&self, parent: Prefix, seq: u64) -> bool {
        let t = self.table;
        unsafe {
            let d = t.load_dir();
            let b = t.bucket(d.route(parent.left_aligned()));
            let st = t.bstate(b.load_state());
            st.results[self.tid].seq() >= seq && st.frozen != Some(tag_of(self.tid, seq))
        }
    }

    /// Announces an unfreeze of the buckets frozen by merge `merge_seq` and
    /// resizes until none remain.
    fn unfreeze_own(&mut self, parent: Prefix, merge_seq: u64) {
        let t = self.table;
        self.announce(OpKind::Unfreeze { depth: parent.len() }, parent.left_aligned(), merge_seq);
        self.stats.unfreezes += 1;
        let tag = tag_of(self.tid, merge_seq);
        loop {
            let remaining = unsafe {
                let d = t.load_dir();
                buckets_under(d.depth, &d.dir, parent)
                    .into_iter()
                    .any(|b| t.bstate(t.bucket(b).load_state()).frozen == Some(tag))
            };
            if !remaining {
                break;
            }
            let _ = self.resize_wf();
        }
    }

    /// Completes announced merge `rec` of thread `m` in `work` if every
    /// participant is frozen by it.
    pub(crate) fn help_merge(&mut self, work: &mut ResizeWork<'_>, m: usize, rec: &OpRecord) {
        let t = self.table;
        let parent = rec.parent();
        let tag = tag_of(m, rec.seq);
        let participants = work.buckets_under(parent);
        if participants.is_empty() {
            return;
        }
        let states: Vec<_> =
            participants.iter().map(|&b| unsafe { t.bstate((*b).load_state()) }).collect();
        if states.iter().any(|s| s.frozen != Some(tag)) {
            return;
        }
        let total: usize = states.iter().map(|s| s.count).sum();
        if total > t.cfg.bucket_capacity {
            return;
        }
        let np = self.local.alloc_bstate();
        let merged = unsafe { &mut *np };
        merged.clear();
        for s in &states {
            for it in s.items() {
                merged.push(*it);
            }
            for (acc, r) in merged.results.iter_mut().zip(s.results.iter()) {
                if r.seq() > acc.seq() {
                    *acc = *r;
                }
            }
        }
        merged.results[m] = ResultSlot::new(rec.seq, SlotOutcome::Merged);
        let b = Box::into_raw(Box::new(Bucket::new(parent, np, t.cfg.threads)));
        work.install(b, &participants);
        if t.cfg.shrink_on_merge {
            work.shrink();
        }
        if m != self.tid {
            self.stats.helped += 1;
        }
    }

    /// Replaces buckets frozen by the merge named in unfreeze request `rec`
    /// with unfrozen copies.
    pub(crate) fn help_unfreeze(&mut self, work: &mut ResizeWork<'_>, m: usize, rec: &OpRecord) {
        let t = self.table;
        let tag = tag_of(m, rec.value);
        for b in work.buckets_under(rec.parent()) {
            let old = unsafe { t.bstate((*b).load_state()) };
            if old.frozen != Some(tag) {
                continue;
            }
            let np = self.local.alloc_bstate();
            let st = unsafe { &mut *np };
            st.copy_from(old);
            st.frozen = None;
            st.applied.fill(0);
            st.results[m] = ResultSlot::new(rec.seq, SlotOutcome::Unfrozen);
            let prefix = unsafe { (*b).prefix };
            let nb = Box::into_raw(Box::new(Bucket::new(prefix, np, t.cfg.threads)));
            work.install(nb, &[b]);
        }
    }
}
