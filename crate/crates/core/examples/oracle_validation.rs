//! Checks the closed-form capture times against Monte Carlo oracles.
//!
//! `cargo run --release --example oracle_validation -- 200000 7`

use pursuit_arena::harness;

fn main() {
    let mut args = std::env::args().skip(1);
    let trials = args.next().map_or(100_000, |s| s.parse().expect("trials"));
    let seed = args.next().map_or(2024, |s| s.parse().expect("seed"));
    let report = harness::validate(trials, seed).expect("validation inputs are fixed");
    print!("{report}");
    if !report.passed() {
        std::process::exit(3);
    }
}
