//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use polarsvbrdf::validation::{all_passed, format_line, run_suite, SuiteOptions};

fn main() {
    // `cargo test -- --list` and filters are not meaningful here.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let results = run_suite(&SuiteOptions::default(), &mut |r| println!("{}", format_line(r)));
    let failed = results.iter().filter(|r| !r.pass).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if !all_passed(&results) {
        std::process::exit(1);
    }
}
