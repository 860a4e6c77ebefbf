//! Runs every acceptance criterion and prints one line per criterion.
//! Exits non-zero when any criterion fails.

use ldpfl_cli::accept::run_suite;

fn main() {
    // `cargo test -- <filter>` and harness flags are ignored; the suite is
    // always run whole.
    let outcomes = run_suite(&[]);
    let mut failed = 0;
    for o in &outcomes {
        println!("{}", o.line());
        if !o.passed {
            failed += 1;
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        outcomes.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
