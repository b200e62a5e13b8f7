//! The acceptance battery: one PASS/FAIL line per criterion, then a summary
//! table. Exits nonzero when any criterion fails.
//!
//! `PUNCTORUS_CRITERIA=2,3` restricts the run to the listed criteria.

use std::io::Write;
use std::process::ExitCode;

use punctorus::battery::{run_check, summary_table};
use punctorus::Config;

fn main() -> ExitCode {
    let ids: Vec<usize> = match std::env::var("PUNCTORUS_CRITERIA") {
        Ok(list) => list
            .split(',')
            .map(|s| s.trim().parse().expect("criterion numbers"))
            .collect(),
        Err(_) => (1..=13).collect(),
    };
    let cfg = Config::default();
    let mut checks = Vec::new();
    for id in ids {
        let check = run_check(id, &cfg).expect("known criterion");
        println!("{}", check.line());
        let _ = std::io::stdout().flush();
        checks.push(check);
    }
    print!("\n{}", summary_table(&checks));
    if checks.iter().all(|c| c.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
