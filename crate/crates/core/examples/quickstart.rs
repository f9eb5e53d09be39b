//! Several threads share one table; each registers once and then inserts,
//! looks up and deletes its own keys while the directory grows underneath.

use wfext::{HashFn, HashTable, Outcome};

fn main() -> wfext::Result<()> {
    let threads = 4;
    let table = HashTable::new(threads, 8, HashFn::Mix, 1)?;

    std::thread::scope(|s| {
        for t in 0..threads as u64 {
            let table = &table;
            s.spawn(move || -> wfext::Result<()> {
                let mut ctx = table.register()?;
                for i in 0..10_000 {
                    let key = i * threads as u64 + t;
                    assert_eq!(ctx.insert(key, key * 10)?, Outcome::Inserted);
                }
                for i in (0..10_000).step_by(2) {
                    ctx.delete(i * threads as u64 + t)?;
                }
                assert_eq!(ctx.lookup(t + threads as u64), Some((t + threads as u64) * 10));
                Ok(())
            });
        }
    });

    let snap = table.snapshot();
    println!("{} keys in {} buckets, directory depth {}", snap.len(), snap.buckets.len(), snap.depth);
    let s = table.stats();
    println!("{} splits, {} directory doublings, {} operations helped", s.splits, s.doublings, s.helped);
    table.check_invariants().expect("invariants");
    Ok(())
}
