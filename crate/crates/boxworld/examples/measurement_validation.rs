//! Measurement validity by affine certificate, effect equivalence, and the
//! separable decomposition of effects.
//!
//! A list of positive effects is a valid measurement iff its total array
//! `M` satisfies `M · P = 1` on every valid state. That infinite family of
//! conditions collapses to two exact checks: `M` hits 1 on the maximally
//! mixed state and `M` is orthogonal to a kernel basis of the equality
//! system (the affine certificate).
//!
//! Run: `cargo run --example measurement_validation`

use boxworld::measurements::{
    affine_certificate, decompose_separable_effect, effects_equivalent, outcome_distribution,
    validate_measurement, Effect, Measurement,
};
use boxworld::rational::{integer, ratio};
use boxworld::states::{maximally_mixed, nosig_vertices};
use boxworld::tensor::BoxTensor;
use boxworld::SystemSignature;

fn main() {
    let sig = SystemSignature::binary(2, 2);
    let basis = affine_certificate(&sig);
    println!(
        "affine certificate for {:?}: difference space has dimension {}",
        sig.subsystems(),
        basis.len()
    );
    assert_eq!(basis.len(), 8);

    // A valid measurement: the always-succeed functional split 50/50.
    let half = Effect::new(BoxTensor::from_fn(sig.clone(), |_, x| {
        if x == [0, 0] {
            ratio(1, 2)
        } else {
            integer(0)
        }
    }))
    .unwrap();
    let fair_split = Measurement::new(vec![half.clone(), half]).unwrap();
    let d = validate_measurement(&fair_split);
    println!(
        "\nfair split of the trivial measurement: valid={} (unit_on_mixed={}, certificate_orthogonal={})",
        d.is_valid(),
        d.unit_on_mixed,
        d.certificate_orthogonal
    );
    assert!(d.is_valid());
    let dist = outcome_distribution(&fair_split, &maximally_mixed(&sig)).unwrap();
    println!(
        "its outcome distribution on the maximally mixed state: {:?}",
        dist.iter()
            .map(boxworld::format_rational)
            .collect::<Vec<_>>()
    );

    // An invalid one: a lone unit-entry effect undershoots 1.
    let lone = Measurement::new(vec![
        Effect::unit_entry(&sig, &[0, 0], &[0, 0], integer(1)).unwrap()
    ])
    .unwrap();
    let d = validate_measurement(&lone);
    println!(
        "\nlone unit-entry effect: valid={} — {}",
        d.is_valid(),
        d.failures.join("; ")
    );
    assert!(!d.is_valid());

    // The certificate verdict agrees with brute-force dots over all 24
    // vertices.
    let vertices = nosig_vertices(&sig).unwrap();
    for (name, m, expected) in [
        ("fair split", &fair_split, true),
        ("lone effect", &lone, false),
    ] {
        let total = boxworld::measurements::total_array(m);
        let vertex_verdict = vertices
            .vertices
            .iter()
            .all(|v| total.tensor().dot(v.tensor()).unwrap() == integer(1));
        println!("vertex-dot verdict for {name}: {vertex_verdict}");
        assert_eq!(vertex_verdict, expected);
    }

    // Effect equivalence: representations are not unique. The two
    // setting indicators are interchangeable on every state.
    let single = SystemSignature::new(vec![vec![2, 2]]).unwrap();
    let at0 = Effect::setting_indicator(&single, &[0]).unwrap();
    let at1 = Effect::setting_indicator(&single, &[1]).unwrap();
    println!(
        "\nsetting indicators at x=0 and x=1 equivalent: {}",
        effects_equivalent(&at0, &at1).unwrap()
    );
    assert!(effects_equivalent(&at0, &at1).unwrap());

    // No entangled effects: any effect splits into weighted products of
    // per-subsystem unit entries, one term per nonzero entry.
    let dense = Effect::new(BoxTensor::from_fn(sig.clone(), |a, x| {
        ratio(((a[0] + a[1] + x[0] + x[1]) % 3) as i64, 4)
    }))
    .unwrap();
    let terms = decompose_separable_effect(&dense);
    println!(
        "\na dense effect decomposes into {} product terms; reconstruction is exact",
        terms.len()
    );
    let mut sum = BoxTensor::zeros(sig);
    for t in &terms {
        sum = sum.add(&t.tensor()).unwrap();
    }
    assert_eq!(&sum, dense.tensor());
}
