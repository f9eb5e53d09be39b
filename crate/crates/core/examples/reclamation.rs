//! Epoch-based reclamation with poisoning on: every reclaimed block is
//! marked, and any later access through a stale pointer would be counted.

use wfext::{Config, HashTable, ReclaimMode};

fn main() -> wfext::Result<()> {
    let threads = 4;
    let cfg = Config::new(threads, 8).reclaim(ReclaimMode::Epoch).poison(true);
    let table = HashTable::with_config(cfg)?;
    std::thread::scope(|s| {
        for t in 0..threads as u64 {
            let table = &table;
            s.spawn(move || {
                let mut ctx = table.register().unwrap();
                for i in 0..50_000u64 {
                    let key = (i * 7919 + t) % 2048;
                    if i % 2 == 0 {
                        ctx.insert(key, i).unwrap();
                    } else {
                        ctx.delete(key).unwrap();
                    }
                }
                let r = ctx.reclaim_stats();
                println!(
                    "thread {}: retired {}, reclaimed {}, heap hits {}, misses {}",
                    ctx.tid(),
                    r.retired,
                    r.reclaimed,
                    r.heap_hits,
                    r.heap_misses
                );
            });
        }
    });
    println!(
        "poison hits {}, pending high water {}",
        table.poison_hits(),
        table.pending_reclaim_high_water()
    );
    Ok(())
}
