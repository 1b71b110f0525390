//! Runs every acceptance criterion and prints one pass/fail line per criterion.
//! Exits non-zero when any criterion fails.

use std::process::ExitCode;

fn main() -> ExitCode {
    let reports = match koopact::verify("all") {
        Ok(r) => r,
        Err(e) => {
            eprintln!("acceptance: {e}");
            return ExitCode::FAILURE;
        }
    };
    for r in &reports {
        println!("{r}");
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    println!("acceptance: {} passed, {failed} failed", reports.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
