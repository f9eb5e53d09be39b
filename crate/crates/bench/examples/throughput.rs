//! Compares both algorithms on two operation mixes and prints one row per run.

use std::time::Duration;

use wfext_bench::report::{write_table, Row};
use wfext_bench::workload::{run_throughput, Algorithm, Mix, WorkloadConfig};

fn main() -> Result<(), wfext_bench::BenchError> {
    let threads = std::thread::available_parallelism().map_or(2, |n| n.get()).min(8);
    let mut rows = Vec::new();
    for mix in [Mix::new(90, 5, 5), Mix::new(50, 25, 25)] {
        for algorithm in [Algorithm::Wfext, Algorithm::Lock] {
            let cfg = WorkloadConfig {
                algorithm,
                threads,
                duration: Duration::from_millis(500),
                key_space: 4096,
                mix,
                ..Default::default()
            };
            let report = run_throughput(&cfg)?;
            rows.push(Row::new(&cfg, 0, &report));
        }
    }
    write_table(&mut std::io::stdout().lock(), &rows)?;
    Ok(())
}
