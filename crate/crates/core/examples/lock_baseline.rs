//! The lock-per-bucket baseline next to the extendible table on the same keys.

use std::time::Instant;

use wfext::{HashFn, HashTable, LockTable};

const THREADS: u64 = 4;
const OPS: u64 = 200_000;

fn main() -> wfext::Result<()> {
    let lock = LockTable::sized_for(4096, 8, HashFn::Mix);
    let start = Instant::now();
    std::thread::scope(|s| {
        for t in 0..THREADS {
            let lock = &lock;
            s.spawn(move || {
                for i in 0..OPS {
                    let key = (i * 31 + t) % 4096;
                    match i % 4 {
                        0 => drop(lock.insert(key, i)),
                        1 => drop(lock.delete(key)),
                        _ => drop(lock.lookup(key)),
                    }
                }
            });
        }
    });
    println!("lock table:   {:?}, {} keys", start.elapsed(), lock.len());

    let table = HashTable::new(THREADS as usize, 8, HashFn::Mix, 1)?;
    let start = Instant::now();
    std::thread::scope(|s| {
        for t in 0..THREADS {
            let table = &table;
            s.spawn(move || {
                let mut ctx = table.register().unwrap();
                for i in 0..OPS {
                    let key = (i * 31 + t) % 4096;
                    match i % 4 {
                        0 => drop(ctx.insert(key, i).unwrap()),
                        1 => drop(ctx.delete(key).unwrap()),
                        _ => drop(ctx.lookup(key)),
                    }
                }
            });
        }
    });
    println!("wfext table:  {:?}, {} keys", start.elapsed(), table.snapshot().len());
    Ok(())
}
