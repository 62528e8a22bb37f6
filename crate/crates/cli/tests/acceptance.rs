//! Acceptance criteria at full tolerance. One line per criterion; the process
//! exits nonzero if any fails. `DYADLAB_SEED` overrides the default seed and
//! `DYADLAB_ONLY=3,7` restricts the run to the listed criteria.

use std::process::ExitCode;
use std::time::Instant;

use dyadlab_cli::suite;

fn main() -> ExitCode {
    let seed = std::env::var("DYADLAB_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(0);
    let only: Option<Vec<u8>> = std::env::var("DYADLAB_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let start = Instant::now();
    let results = match &only {
        None => suite::run_all(seed, |r| println!("{}", r.line())),
        Some(ids) => suite::run_selected(seed, ids, |r| println!("{}", r.line())),
    };
    let failed = results.iter().filter(|r| !r.passed).count();
    println!(
        "acceptance: {} passed, {} failed ({:.0}s, seed {seed})",
        results.len() - failed,
        failed,
        start.elapsed().as_secs_f64()
    );
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
