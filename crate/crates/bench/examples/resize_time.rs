//! Time to grow from two buckets to a range of key counts.

use wfext_bench::resize::{run_resize_benchmark, ResizeConfig};

fn main() -> Result<(), wfext_bench::BenchError> {
    println!("{:>8} {:>10} {:>6} {:>10} {:>9}", "keys", "seconds", "depth", "expected", "buckets");
    for shift in [10, 12, 14, 16] {
        let r = run_resize_benchmark(&ResizeConfig { threads: 4, key_space: 1 << shift, ..Default::default() })?;
        println!(
            "{:>8} {:>10.4} {:>6} {:>10} {:>9}",
            r.keys,
            r.elapsed.as_secs_f64(),
            r.final_depth,
            r.oracle_depth,
            r.buckets
        );
    }
    Ok(())
}
