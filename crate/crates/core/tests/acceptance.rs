//! Runs every acceptance criterion and prints one line per criterion.

use std::process::ExitCode;
use std::time::Instant;

use osp_core::suite::{run_criterion, run_suite, SuiteConfig, ALL_CRITERIA};

fn main() -> ExitCode {
    let cfg = SuiteConfig { seed: 2024, tol: 1e-8 };
    let start = Instant::now();
    let mut failed = 0;
    for id in ALL_CRITERIA {
        let r = run_criterion(id, &cfg);
        let mark = if r.passed { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {mark}: {} - {}", r.name, r.detail);
        if !r.passed {
            failed += 1;
        }
    }

    // whole-suite replay: two runs with one seed serialize identically
    let first = run_suite(&cfg, &ALL_CRITERIA).to_json();
    let second = run_suite(&cfg, &ALL_CRITERIA).to_json();
    let identical = first == second;
    println!(
        "full suite replay {}: {} bytes",
        if identical { "PASS" } else { "FAIL" },
        first.len()
    );
    if !identical {
        failed += 1;
    }
    println!("acceptance: {} failed, {:.1}s", failed, start.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
