//! A valid tripartite measurement that no mixture of wirings implements.
//!
//! With three subsystems, decomposability into wiring mixtures breaks
//! down: this eight-outcome measurement is made of product effects only
//! (single unit entries), passes validity, yet its total array is
//! LP-infeasible over all enumerated wiring arrays. The obstruction is local: the unit entry at
//! `(001|000)` is surrounded by zeros inside its block, while a wiring's
//! array is constant along the last-measured subsystem's outcome, so it
//! cannot isolate that entry.
//!
//! Run: `cargo run --example tripartite_counterexample`

use boxworld::measurements::{total_array, validate_measurement};
use boxworld::rational::format_rational;
use boxworld::wiring::{counterexample_tripartite, lp_decompose, LpOutcome};

fn main() {
    let m = counterexample_tripartite();
    println!(
        "measurement on {:?} with {} outcomes, one unit entry each",
        m.signature().subsystems(),
        m.outcome_count()
    );

    let diagnostics = validate_measurement(&m);
    println!(
        "valid measurement: {} (unit on mixed: {}, certificate orthogonal: {})",
        diagnostics.is_valid(),
        diagnostics.unit_on_mixed,
        diagnostics.certificate_orthogonal
    );
    assert!(diagnostics.is_valid());

    let array = total_array(&m);
    let t = array.tensor();
    println!("\nthe isolated entry and its block neighbours:");
    println!(
        "  M(001|000) = {}",
        format_rational(t.get(&[0, 0, 1], &[0, 0, 0]))
    );
    println!(
        "  M(101|000) = {}",
        format_rational(t.get(&[1, 0, 1], &[0, 0, 0]))
    );
    println!(
        "  M(011|000) = {}",
        format_rational(t.get(&[0, 1, 1], &[0, 0, 0]))
    );
    println!(
        "  M(000|000) = {}",
        format_rational(t.get(&[0, 0, 0], &[0, 0, 0]))
    );
    assert!(t.get(&[0, 0, 1], &[0, 0, 0]) == &boxworld::integer(1));
    assert!(t.get(&[1, 0, 1], &[0, 0, 0]) == &boxworld::integer(0));
    assert!(t.get(&[0, 1, 1], &[0, 0, 0]) == &boxworld::integer(0));
    assert!(t.get(&[0, 0, 0], &[0, 0, 0]) == &boxworld::integer(0));

    println!("\nsolving the exact LP over all wiring arrays...");
    match lp_decompose(&array).unwrap() {
        LpOutcome::Decomposed(_) => unreachable!("the counterexample must not decompose"),
        LpOutcome::Infeasible(cert) => {
            println!("infeasible, as claimed; certificate re-verified by dot products:");
            let verified = cert.verify(&array).unwrap();
            println!("  f·M + s = positive gap, f·B + s <= 0 for every wiring array: {verified}");
            assert!(verified);
            let gap = cert.functional.dot(array.tensor()).unwrap() + &cert.offset;
            println!(
                "  witness gap at the input array: {}",
                format_rational(&gap)
            );
        }
    }
}
