//! Records small concurrent histories and checks them for linearizability,
//! first against the real table and then against a build that applies
//! announced operations without the sequence-number guard.

use wfext::Fault;
use wfext_bench::lincheck::{sweep, LincheckConfig};

fn main() -> Result<(), wfext_bench::BenchError> {
    let base = LincheckConfig::default();
    let good = sweep(&base, 0, 500)?;
    println!("{} histories, {} with splits, {} violations", good.histories, good.with_splits, good.violations);

    let bad = sweep(&LincheckConfig { fault: Fault::SkipSeqnumGuard, ..base }, 0, 500)?;
    println!("without the guard: {} of {} histories rejected", bad.violations, bad.histories);
    if let Some((seed, h)) = bad.first_violation {
        println!("first counterexample (seed {seed}):\n{h}");
    }
    Ok(())
}
