//! Acceptance suite: every check at reference sizes, one PASS/FAIL line per
//! check with its measured quantities. Exits non-zero if any check fails.
//!
//! Pass check numbers as arguments to run a subset.

use std::process::ExitCode;

use ellflow::acceptance::{run, Tier};

fn main() -> ExitCode {
    let selected: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let ids: Vec<u8> = if selected.is_empty() { (1..=11).collect() } else { selected };
    let mut failed = Vec::new();
    for id in ids {
        let outcome = run(id, Tier::Full);
        println!("{}", outcome.line());
        if !outcome.passed {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all checks passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed checks {failed:?}");
        ExitCode::FAILURE
    }
}
