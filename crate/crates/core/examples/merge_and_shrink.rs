//! Grows a table, deletes most keys, then merges sibling buckets back
//! together. The directory halves whenever no pair of entries differs.

use wfext::{Config, HashTable, MergeOutcome, Prefix};

fn main() -> wfext::Result<()> {
    let table = HashTable::with_config(Config::new(1, 4))?;
    let mut ctx = table.register()?;
    for k in 0..200 {
        ctx.insert(k, k)?;
    }
    println!("grown: depth {}, {} buckets", table.depth(), table.snapshot().buckets.len());

    for k in 8..200 {
        ctx.delete(k)?;
    }
    // Merge bottom-up: the deepest parents first, until nothing changes.
    loop {
        let snap = table.snapshot();
        let mut parents: Vec<Prefix> = snap
            .buckets
            .iter()
            .filter(|b| b.depth() > 1)
            .map(|b| Prefix::new(b.prefix.bits() >> 1, b.depth() - 1))
            .collect();
        parents.sort_by_key(|p| std::cmp::Reverse(p.len()));
        parents.dedup();
        let mut merged = 0;
        for p in parents {
            if ctx.request_merge(p)? == MergeOutcome::Merged {
                merged += 1;
            }
        }
        if merged == 0 {
            break;
        }
    }
    let snap = table.snapshot();
    println!("after merging: depth {}, {} buckets, {} keys", snap.depth, snap.buckets.len(), snap.len());
    table.check_invariants().expect("invariants");
    Ok(())
}
