//! Result rows: a human-readable table and CSV.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::BenchError;
use crate::workload::{ThroughputReport, WorkloadConfig};

/// Peak resident set size in bytes, from `/proc/self/status` where available.
pub fn memory_high_water() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

/// One CSV row: the full configuration followed by the measurements.
#[derive(Clone, Debug, Serialize)]
pub struct Row {
    pub algo: String,
    pub threads: usize,
    pub duration_s: f64,
    pub keys: u64,
    pub lookup_pct: u8,
    pub insert_pct: u8,
    pub delete_pct: u8,
    pub prefill: f64,
    pub bucket_size: usize,
    pub initial_depth: u8,
    pub seed: u64,
    pub reclaim: String,
    pub run: usize,
    pub ops_total: u64,
    pub ops_per_sec: f64,
    pub lookups: u64,
    pub inserts: u64,
    pub deletes: u64,
    pub resizes: u64,
    pub final_depth: u8,
    pub mem_high_water_bytes: Option<u64>,
}

impl Row {
    pub fn new(cfg: &WorkloadConfig, run: usize, r: &ThroughputReport) -> Self {
        Row {
            algo: cfg.algorithm.to_string(),
            threads: cfg.threads,
            duration_s: r.elapsed.as_secs_f64(),
            keys: cfg.key_space,
            lookup_pct: cfg.mix.lookup,
            insert_pct: cfg.mix.insert,
            delete_pct: cfg.mix.delete,
            prefill: cfg.prefill,
            bucket_size: cfg.bucket_capacity,
            initial_depth: cfg.initial_depth,
            seed: cfg.seed,
            reclaim: format!("{:?}", cfg.reclaim).to_lowercase(),
            run,
            ops_total: r.ops_total,
            ops_per_sec: r.ops_per_second,
            lookups: r.counts.lookups,
            inserts: r.counts.inserts,
            deletes: r.counts.deletes,
            resizes: r.resize_count,
            final_depth: r.directory_depth_final,
            mem_high_water_bytes: r.memory_high_water,
        }
    }
}

pub fn write_csv(path: &Path, rows: &[Row]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn same_config(a: &Row, b: &Row) -> bool {
    (a.algo == b.algo && a.reclaim == b.reclaim)
        && (a.threads, a.keys, a.bucket_size, a.initial_depth) == (b.threads, b.keys, b.bucket_size, b.initial_depth)
        && (a.lookup_pct, a.insert_pct, a.delete_pct) == (b.lookup_pct, b.insert_pct, b.delete_pct)
        && a.prefill == b.prefill
}

pub fn write_table(out: &mut impl Write, rows: &[Row]) -> std::io::Result<()> {
    writeln!(
        out,
        "{:>6} {:>4} {:>3} {:>8} {:>9} {:>14} {:>12} {:>8} {:>5}",
        "algo", "run", "thr", "keys", "mix", "ops/s", "ops", "resizes", "depth"
    )?;
    for r in rows {
        writeln!(
            out,
            "{:>6} {:>4} {:>3} {:>8} {:>9} {:>14.0} {:>12} {:>8} {:>5}",
            r.algo,
            r.run,
            r.threads,
            r.keys,
            format!("{}/{}/{}", r.lookup_pct, r.insert_pct, r.delete_pct),
            r.ops_per_sec,
            r.ops_total,
            r.resizes,
            r.final_depth
        )?;
    }
    // Repeated runs of one configuration differ only in run index and seed.
    let mut groups: Vec<(&Row, Vec<f64>)> = Vec::new();
    for r in rows {
        match groups.iter_mut().find(|(g, _)| same_config(g, r)) {
            Some((_, v)) => v.push(r.ops_per_sec),
            None => groups.push((r, vec![r.ops_per_sec])),
        }
    }
    for (g, v) in groups.iter().filter(|(_, v)| v.len() > 1) {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        writeln!(
            out,
            "{} {} threads {}/{}/{}: mean {mean:.0} ops/s over {} runs",
            g.algo,
            g.threads,
            g.lookup_pct,
            g.insert_pct,
            g.delete_pct,
            v.len()
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(algo: &str, run: usize, ops_per_sec: f64) -> Row {
        Row {
            algo: algo.into(),
            threads: 2,
            duration_s: 1.0,
            keys: 100,
            lookup_pct: 50,
            insert_pct: 25,
            delete_pct: 25,
            prefill: 0.5,
            bucket_size: 8,
            initial_depth: 1,
            seed: run as u64,
            reclaim: "epoch".into(),
            run,
            ops_total: ops_per_sec as u64,
            ops_per_sec,
            lookups: 0,
            inserts: 0,
            deletes: 0,
            resizes: 0,
            final_depth: 1,
            mem_high_water_bytes: None,
        }
    }

    #[test]
    fn table_averages_each_configuration_separately() {
        let rows = [row("wfext", 0, 100.0), row("wfext", 1, 300.0), row("lock", 0, 50.0)];
        let mut out = Vec::new();
        write_table(&mut out, &rows).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains("wfext 2 threads 50/25/25: mean 200 ops/s over 2 runs"), "{text}");
        assert!(!text.contains("lock 2 threads 50/25/25: mean"), "{text}");
    }

    #[test]
    fn csv_has_header_and_one_line_per_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        write_csv(&path, &[row("wfext", 0, 1.0), row("lock", 0, 2.0)]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("algo,threads,duration_s,keys,lookup_pct"));
        assert!(lines[2].starts_with("lock,2,"));
    }

    #[test]
    fn reads_peak_rss_on_linux() {
        if cfg!(target_os = "linux") {
            assert!(memory_high_water().unwrap() > 0);
        }
    }
}
