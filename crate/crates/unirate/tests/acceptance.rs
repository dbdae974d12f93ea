//! Acceptance criteria 1-13, one PASS/FAIL line each. Two informational
//! variants follow criteria 6 and 8. Exits non-zero if a criterion fails.

use unirate::verify::{acceptance, VerifyOptions};

fn main() {
    let opts = VerifyOptions { seed: 2024, quick: false, threads: None };
    let checks = acceptance(&opts);
    let mut failed = Vec::new();
    for c in &checks {
        println!("{}", c.line());
        if !c.ok && c.name.starts_with("criterion") && !c.name.ends_with("informational") {
            failed.push(c.name.clone());
        }
    }
    println!("acceptance: {} of 13 criteria passed", 13 - failed.len());
    if !failed.is_empty() {
        println!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
