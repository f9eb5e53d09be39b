//! Replays a small, hand-built layout with the identity hash so routing by
//! leading key bits can be followed by eye. Keys are written as bit strings.

use wfext::{key_from_bits, Config, HashFn, HashTable, Prefix};

fn main() -> wfext::Result<()> {
    let cfg = Config::new(1, 2).hash(HashFn::Identity).initial_depth(2);
    let layout: Vec<(Prefix, Vec<(u64, u64)>)> = vec![
        ("0".parse().unwrap(), vec![(key_from_bits("0001"), 1), (key_from_bits("0100"), 2)]),
        ("1".parse().unwrap(), vec![(key_from_bits("1001"), 3)]),
    ];
    let table = HashTable::from_layout(cfg, 2, &layout)?;
    let mut ctx = table.register()?;
    println!("initial\n{}", table.snapshot());

    for (i, bits) in ["1100", "0010", "0000"].into_iter().enumerate() {
        ctx.insert(key_from_bits(bits), 10 + i as u64)?;
        println!("after inserting {bits}\n{}", table.snapshot());
    }
    Ok(())
}
