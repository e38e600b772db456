//! Simulating any measurement with fiducial measurements plus
//! post-selection.
//!
//! Even measurements beyond wiring mixtures (like the tripartite
//! counterexample) can be simulated if failure is allowed: draw a joint
//! setting uniformly, sample outcomes from the state, then announce `r`
//! with probability `R_r(a|x) / max M` and failure otherwise. Conditioned
//! on success the statistics match the real measurement exactly.
//!
//! Run: `cargo run --example postselection_simulation`

use boxworld::measurements::simulate_postselect;
use boxworld::rational::{format_rational, integer, ratio};
use boxworld::states::maximally_mixed;
use boxworld::wiring::counterexample_tripartite;

fn main() {
    let m = counterexample_tripartite();
    let p = maximally_mixed(m.signature());
    let samples = 100_000;
    let seed = 0xfeed;

    let report = simulate_postselect(&m, &p, samples, seed).unwrap();
    println!(
        "simulated {} trials (seed {}): {} successes, {} failures",
        report.samples,
        report.seed,
        report.successes(),
        report.failures
    );
    println!(
        "exact success rate: {}, observed {}/{}",
        format_rational(&report.expected_success_rate),
        report.successes(),
        report.samples
    );
    assert_eq!(report.expected_success_rate, ratio(1, 8));

    println!("\noutcome   exact   observed (conditioned on success)");
    let empirical = report.empirical_conditional();
    for (r, (exact, seen)) in report.expected.iter().zip(&empirical).enumerate() {
        println!(
            "  r={r}:    {}    {} ≈ {:>7}",
            format_rational(exact),
            report.counts[r],
            format_rational(seen)
        );
        assert_eq!(exact, &ratio(1, 8));
    }

    // Exact 5-sigma binomial check, by squaring so no floats are involved:
    // (c/n − 1/8)² ≤ 25 · (1/8)(7/8) / n.
    let n = integer(report.successes() as i64);
    let bound = integer(25) * ratio(7, 64) / &n;
    for (r, &c) in report.counts.iter().enumerate() {
        let dev = integer(c as i64) / &n - ratio(1, 8);
        assert!(&dev * &dev <= bound, "outcome {r} outside 5 sigma");
    }
    println!("\nall conditional frequencies within 5 binomial standard deviations of 1/8");

    // Determinism: the same seed reproduces the report bit for bit.
    let again = simulate_postselect(&m, &p, samples, seed).unwrap();
    assert_eq!(report, again);
    println!("rerun with the same seed is identical");
}
