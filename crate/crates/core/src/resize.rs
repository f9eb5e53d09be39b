//! Bucket splits and directory replacement.
//!
//! A resizing thread takes a snapshot of the directory, executes every
//! pending operation that is stuck on a full bucket (splitting buckets and
//! doubling the directory as needed), helps pending merges, and publishes the
//! result with a single CAS. It makes at most two attempts; losing both means
//! another resizer published a directory that already covers the work.

use std::collections::HashSet;
use std::sync::atomic::Ordering;

use crate::error::{Error, Result};
use crate::key::Prefix;
use crate::reclaim::Garbage;
use crate::state::{Bucket, DState, OpKind, ResultSlot};
use crate::table::{exec_unpublished, Exec, ThreadContext};

/// Doubles a directory: entry `e` becomes entries `2e` and `2e + 1`.
pub(crate) fn double_dir<T: Copy>(depth: &mut u8, dir: &mut Vec<T>) {
    let mut next = Vec::with_capacity(dir.len() * 2);
    for &b in dir.iter() {
        next.push(b);
        next.push(b);
    }
    *dir = next;
    *depth += 1;
}

/// Halves a directory while every entry pair `(2e, 2e + 1)` coincides and the
/// depth stays at least 1. Returns the number of halvings.
pub(crate) fn shrink_dir<T: Copy + PartialEq>(depth: &mut u8, dir: &mut Vec<T>) -> u32 {
    let mut steps = 0;
    while *depth > 1 && dir.chunks_exact(2).all(|p| p[0] == p[1]) {
        *dir = dir.chunks_exact(2).map(|p| p[0]).collect();
        *depth -= 1;
        steps += 1;
    }
    steps
}

/// Directory under construction by one resize attempt. The snapshot's array
/// is copied only when the first change is made.
pub(crate) struct ResizeWork<'a> {
    snap: &'a DState,
    local: Option<(u8, Vec<*mut Bucket>)>,
    /// Private buckets referenced by the local directory.
    created: HashSet<*mut Bucket>,
    /// Published buckets no longer referenced.
    replaced: Vec<*mut Bucket>,
    /// Private buckets superseded before publication.
    discarded: Vec<*mut Bucket>,
}

impl<'a> ResizeWork<'a> {
    pub fn new(snap: &'a DState) -> Self {
        ResizeWork {
            snap,
            local: None,
            created: HashSet::new(),
            replaced: Vec::new(),
            discarded: Vec::new(),
        }
    }

    pub fn depth(&self) -> u8 {
        self.local.as_ref().map_or(self.snap.depth, |l| l.0)
    }

    pub fn dir(&self) -> &[*mut Bucket] {
        self.local.as_ref().map_or(&self.snap.dir, |l| &l.1)
    }

    /// Bucket for a hash value (not a key).
    pub fn route(&self, hash: u64) -> *mut Bucket {
        self.dir()[crate::key::top_bits(hash, self.depth()) as usize]
    }

    pub fn is_private(&self, b: *mut Bucket) -> bool {
        self.created.contains(&b)
    }

    pub fn changed(&self) -> bool {
        self.local.is_some()
    }

    fn local_mut(&mut self) -> &mut (u8, Vec<*mut Bucket>) {
        let snap = self.snap;
        self.local.get_or_insert_with(|| (snap.depth, snap.dir.clone()))
    }

    /// Distinct buckets whose prefixes extend `parent`, in ascending order.
    /// Empty if `parent` lies inside a single shallower bucket.
    pub fn buckets_under(&self, parent: Prefix) -> Vec<*mut Bucket> {
        buckets_under(self.depth(), self.dir(), parent)
    }

    /// Unlinks `old` from the bookkeeping after it stopped being referenced.
    fn drop_ref(&mut self, old: *mut Bucket) {
        if self.created.remove(&old) {
            self.discarded.push(old);
        } else {
            self.replaced.push(old);
        }
    }

    /// Points every entry under `b`'s prefix to `b`, replacing `olds`.
    pub fn install(&mut self, b: *mut Bucket, olds: &[*mut Bucket]) {
        let prefix = unsafe { (*b).prefix };
        let (depth, dir) = self.local_mut();
        debug_assert!(prefix.len() <= *depth);
        for i in prefix.dir_range(*depth) {
            dir[i] = b;
        }
        self.created.insert(b);
        for &o in olds {
            self.drop_ref(o);
        }
    }

    /// Halves the local directory while possible.
    pub fn shrink(&mut self) -> u32 {
        let (depth, dir) = self.local_mut();
        shrink_dir(depth, dir)
    }

    /// Grows the local directory to at least `depth`. Returns the number of doublings.
    fn grow_to(&mut self, depth: u8) -> u64 {
        let (d, dir) = self.local_mut();
        let mut steps = 0;
        while *d < depth {
            double_dir(d, dir);
            steps += 1;
        }
        steps
    }
}

pub(crate) fn buckets_under(depth: u8, dir: &[*mut Bucket], parent: Prefix) -> Vec<*mut Bucket> {
    if depth < parent.len() {
        return Vec::new();
    }
    let mut out: Vec<*mut Bucket> = Vec::new();
    for &b in &dir[parent.dir_range(depth)] {
        if out.last() != Some(&b) {
            out.push(b);
        }
    }
    out
}

impl ThreadContext<'_> {
    /// Splits a full bucket into two private children by the next hash bit.
    pub(crate) fn split_bucket(&mut self, parent: &Bucket) -> Result<(*mut Bucket, *mut Bucket)> {
        let t = self.table;
        let depth = parent.depth();
        if depth >= t.cfg.max_depth {
            return Err(Error::DepthOverflow { depth: depth + 1, max: t.cfg.max_depth });
        }
        let st = unsafe { t.bstate(parent.load_state()) };
        let n = t.cfg.threads;
        let s0 = self.local.alloc_bstate();
        let s1 = self.local.alloc_bstate();
        unsafe {
            for s in [s0, s1] {
                (*s).clear();
                (*s).results.copy_from_slice(&st.results);
            }
            for it in st.items() {
                let h = t.hash(it.key);
                let target = if (h >> (63 - depth as u32)) & 1 == 0 { s0 } else { s1 };
                (*target).push(*it);
            }
        }
        self.stats.splits += 1;
        let b0 = Box::into_raw(Box::new(Bucket::new(parent.prefix.child(false), s0, n)));
        let b1 = Box::into_raw(Box::new(Bucket::new(parent.prefix.child(true), s1, n)));
        Ok((b0, b1))
    }

    /// Links the two halves of a split `parent` into the local directory,
    /// doubling it first if the halves are deeper than it.
    pub(crate) fn directory_update(
        &mut self,
        work: &mut ResizeWork<'_>,
        parent: *mut Bucket,
        b0: *mut Bucket,
        b1: *mut Bucket,
    ) {
        let child_depth = unsafe { (*b0).depth() };
        self.stats.doublings += work.grow_to(child_depth);
        work.install(b0, &[]);
        work.install(b1, &[parent]);
    }

    /// Executes the pending updates that target the full bucket `full`,
    /// splitting destination buckets until they have room. Returns whether the
    /// caller's own operation could not be placed because of the depth limit.
    pub(crate) fn apply_pending_resize(&mut self, work: &mut ResizeWork<'_>, full: *mut Bucket) -> bool {
        let t = self.table;
        let n = t.cfg.threads;
        let guard = t.guard_enabled();
        self.stats.pending_resize_calls += 1;
        let full_prefix = unsafe { (*full).prefix };
        let full_state = unsafe { t.bstate((*full).load_state()) };
        let mut blocked = false;
        'ops: for j in 0..n {
            let Some(rec) = t.help[j].read() else { continue };
            if !matches!(rec.kind, OpKind::Insert | OpKind::Delete) || !rec.targets(full_prefix, t.cfg.hash) {
                continue;
            }
            if guard && rec.seq <= full_state.results[j].seq() {
                continue;
            }
            let h = t.hash(rec.key);
            let mut dest = work.route(h);
            loop {
                // A published full bucket is immutable, so split at least once.
                // A private one only needs room if a new key goes in.
                let ds = unsafe { t.bstate((*dest).load_state()) };
                let needs_room = rec.kind == OpKind::Insert && ds.find(rec.key).is_none();
                if work.is_private(dest) && !(ds.is_full() && needs_room) {
                    break;
                }
                if !ds.is_full() {
                    break;
                }
                match self.split_bucket(unsafe { &*dest }) {
                    Ok((b0, b1)) => self.directory_update(work, dest, b0, b1),
                    Err(_) => {
                        blocked |= j == self.tid;
                        continue 'ops;
                    }
                }
                dest = work.route(h);
            }
            if !work.is_private(dest) {
                continue;
            }
            let ds = unsafe { &mut *(*dest).load_state() };
            if guard && rec.seq <= ds.results[j].seq() {
                continue;
            }
            if let Exec::Done(o) = exec_unpublished(ds, &rec, j) {
                ds.results[j] = ResultSlot::new(rec.seq, o);
                if j != self.tid {
                    self.stats.helped += 1;
                }
            }
        }
        blocked
    }

    /// Resolves pending full-bucket operations and merge work by publishing
    /// a new directory. Fails only if the caller's own update cannot be
    /// placed without exceeding the depth limit.
    pub(crate) fn resize_wf(&mut self) -> Result<()> {
        let t = self.table;
        let n = t.cfg.threads;
        let guard = t.guard_enabled();
        self.stats.resize_calls += 1;
        let mut publishes = 0u64;
        let mut outcome = Ok(());
        for _ in 0..2 {
            let snap_p = t.ht.load(Ordering::SeqCst);
            let snap = unsafe { t.dstate(snap_p) };
            let mut work = ResizeWork::new(snap);
            let mut pending_calls = 0u64;
            let mut blocked = false;
            for j in 0..n {
                let Some(rec) = t.help[j].read() else { continue };
                match rec.kind {
                    OpKind::Insert | OpKind::Delete => {
                        let dest = work.route(t.hash(rec.key));
                        let ds = unsafe { t.bstate((*dest).load_state()) };
                        if ds.is_full() && ds.frozen.is_none() && (!guard || rec.seq > ds.results[j].seq()) {
                            pending_calls += 1;
                            blocked |= self.apply_pending_resize(&mut work, dest);
                        }
                    }
                    OpKind::Merge { .. } => self.help_merge(&mut work, j, &rec),
                    OpKind::Unfreeze { .. } => self.help_unfreeze(&mut work, j, &rec),
                    OpKind::Nop => {}
                }
            }
            self.stats.max_pending_resize_per_resize =
                self.stats.max_pending_resize_per_resize.max(pending_calls);
            outcome = if blocked { Err(Error::TableAtMaxDepth(t.cfg.max_depth)) } else { Ok(()) };
            if !work.changed() {
                break;
            }
            let ResizeWork { local, created, replaced, discarded, .. } = work;
            let (depth, dir) = local.expect("changed work has a local directory");
            let new_p = Box::into_raw(Box::new(DState::new(depth, dir)));
            if let Some(h) = &t.cfg.hooks {
                h.before_directory_cas(self.tid);
            }
            publishes += 1;
            if t.ht.compare_exchange(snap_p, new_p, Ordering::SeqCst, Ordering::SeqCst).is_ok() {
                self.stats.directory_publishes += 1;
                self.local.retire(Garbage::Dir(snap_p), &t.epochs);
                for b in replaced {
                    self.local.retire(Garbage::Bucket(b), &t.epochs);
                }
                for b in discarded {
                    unsafe { self.local.free_private_bucket(b) };
                }
                if let Some(h) = &t.cfg.hooks {
                    h.after_directory_publish(self.tid);
                }
                break;
            }
            unsafe {
                drop(Box::from_raw(new_p));
                for b in created.into_iter().chain(discarded) {
                    self.local.free_private_bucket(b);
                }
            }
            outcome = Ok(());
        }
        self.stats.resize_publish_attempts += publishes;
        self.stats.resize_max_publish = self.stats.resize_max_publish.max(publishes);
        outcome
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_maps_entry_to_pair() {
        let mut depth = 2;
        let mut dir = vec!['a', 'b', 'c', 'c'];
        double_dir(&mut depth, &mut dir);
        assert_eq!(depth, 3);
        assert_eq!(dir, vec!['a', 'a', 'b', 'b', 'c', 'c', 'c', 'c']);
    }

    #[test]
    fn shrink_halves_until_pairs_differ() {
        let mut depth = 3;
        let mut dir = vec!['a', 'a', 'b', 'b', 'c', 'c', 'c', 'c'];
        assert_eq!(shrink_dir(&mut depth, &mut dir), 1);
        assert_eq!((depth, dir), (2, vec!['a', 'b', 'c', 'c']));
    }

    #[test]
    fn shrink_stops_at_depth_one() {
        let mut depth = 3;
        let mut dir = vec!['x'; 8];
        assert_eq!(shrink_dir(&mut depth, &mut dir), 2);
        assert_eq!((depth, dir), (1, vec!['x', 'x']));
    }
}
