//! State transformations: validity checking and application to one
//! subsystem of a joint state.
//!
//! A transformation is an array acting linearly on state tensors; it is
//! physical exactly when it maps every extreme point of the single-system
//! state space to a valid state. This example validates the identity, a
//! relabelling, and a constant map, rejects a sign-flipped map, and applies
//! a transformation to Alice's half of a PR box.
//!
//! Run: `cargo run --example transformations`

use boxworld::protocols::{apply_transformation, validate_transformation, Transformation};
use boxworld::rational::{integer, ratio};
use boxworld::states::{chsh, maximally_mixed, pr_box, State};
use boxworld::tensor::{BoxTensor, Relabelling};
use boxworld::SystemSignature;

fn main() {
    let local = SystemSignature::new(vec![vec![2, 2]]).unwrap();

    let identity = Transformation::identity(&local);
    println!(
        "identity map valid: {}",
        validate_transformation(&identity).unwrap()
    );
    assert!(validate_transformation(&identity).unwrap());

    // A relabelling (flip the outcomes of fiducial 1) acts on the PR box
    // like the corresponding joint relabelling.
    let mut relabelling = Relabelling::identity(&local);
    relabelling.subsystems[0].outcome_perms[1] = vec![1, 0];
    let flip = Transformation::from_relabelling(&local, &relabelling).unwrap();
    println!(
        "outcome-flip map valid: {}",
        validate_transformation(&flip).unwrap()
    );

    let pr = pr_box();
    let flipped = apply_transformation(&flip, &pr, 0).unwrap();
    let s_before = chsh(&pr).unwrap();
    let s_after = chsh(&flipped).unwrap();
    println!("CHSH before/after flipping Alice's x=1 outcomes: {s_before} / {s_after}");
    // Flipping a at x=1 turns a⊕b = xy into a⊕b = xy⊕x: still a nonlocal
    // vertex, but living on a relabelled CHSH facet that this fixed
    // convention no longer sees.
    assert_eq!(s_after, integer(0));
    assert!(matches!(
        boxworld::states::is_local(&flipped).unwrap(),
        boxworld::states::LocalityResult::Nonlocal { .. }
    ));
    println!("the flipped box scores 0 on this CHSH yet remains certifiably nonlocal");

    // The constant map erases all input dependence; applied to Alice's
    // half of the PR box it produces target ⊗ (Bob's uniform marginal).
    let target = State::new(
        BoxTensor::from_values(
            local.clone(),
            vec![ratio(2, 3), ratio(1, 3), ratio(1, 2), ratio(1, 2)],
        )
        .unwrap(),
    )
    .unwrap();
    let constant = Transformation::constant(&target);
    println!(
        "constant map valid: {}",
        validate_transformation(&constant).unwrap()
    );
    let replaced = apply_transformation(&constant, &pr, 0).unwrap();
    let expected = target
        .tensor()
        .tensor_product(maximally_mixed(&local).tensor());
    assert_eq!(replaced.tensor(), &expected);
    println!(
        "constant map sends PR to target ⊗ uniform: CHSH = {}",
        chsh(&replaced).unwrap()
    );

    // A sign flip makes the map produce negative probabilities; rejected.
    let n = local.entry_count();
    let mut entries = vec![integer(0); n * n];
    for i in 0..n {
        entries[i * n + i] = if i == 0 { integer(-1) } else { integer(1) };
    }
    let bad = Transformation::new(local.clone(), local, entries).unwrap();
    println!(
        "sign-flipped map valid: {}",
        validate_transformation(&bad).unwrap()
    );
    assert!(!validate_transformation(&bad).unwrap());
    assert!(apply_transformation(&bad, &pr, 0).is_err());
}
