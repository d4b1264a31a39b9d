//! Runs the finite-difference gradient suite and prints one row per case
//! and seed.
//!
//!     cargo run --example gradient_check -- [seeds]

use movie_affect::eval::gradsuite::{run_suite, GRAD_EPS, GRAD_TOLERANCE};

fn main() -> movie_affect::Result<()> {
    let seeds = std::env::args().nth(1).map_or(3, |s| s.parse().expect("seed count"));
    println!("eps {GRAD_EPS:e}, tolerance {GRAD_TOLERANCE:e}");
    for case in run_suite(0, seeds)? {
        let mark = if case.passed() { "ok" } else { "FAIL" };
        println!("{:<26} seed {} {:.2e} {mark}", case.name, case.seed, case.error);
    }
    Ok(())
}
