//! Wirings and the constructive decomposition of bipartite measurements.
//!
//! Every valid measurement on one or two subsystems is a convex mixture of
//! "basic" measurements: adaptive sequences of fiducial measurements with a
//! deterministic announcement. This example builds the classic adaptive
//! wiring (measure subsystem 0, feed its outcome into subsystem 1's
//! setting), mixes random wiring arrays, recovers mixtures greedily, checks
//! the LP route agrees, and executes the resulting randomized protocol.
//!
//! Run: `cargo run --example wiring_decomposition`

use boxworld::measurements::{outcome_distribution, total_array};
use boxworld::random::{random_local_state, random_total_array_mixture};
use boxworld::rational::format_rational;
use boxworld::wiring::{
    enumerate_basic_arrays, greedy_decompose, lp_decompose, randomized_protocol, tree_effects,
    BasicTree, LpOutcome,
};
use boxworld::SystemSignature;
use rand::rngs::StdRng;
use rand::SeedableRng;

fn main() {
    let sig = SystemSignature::binary(2, 2);

    // The adaptive wiring and its 0/1 array.
    let tree = BasicTree::node(
        0,
        0,
        vec![
            BasicTree::node(1, 0, vec![BasicTree::leaf(0), BasicTree::leaf(1)]),
            BasicTree::node(1, 1, vec![BasicTree::leaf(0), BasicTree::leaf(1)]),
        ],
    );
    let m = tree_effects(&tree, &sig).unwrap();
    println!("adaptive wiring: x_1 = 0, then x_2 = a_1, announce r = a_2");
    let array = total_array(&m);
    for x in sig.settings() {
        let row: Vec<String> = sig
            .outcomes(&x)
            .map(|a| format_rational(array.tensor().get(&a, &x)))
            .collect();
        println!("  M at x={:?}: {}", x, row.join(" "));
    }

    // Its greedy decomposition is itself.
    let d = greedy_decompose(&array).unwrap();
    println!(
        "greedy decomposition: {} term(s), weight {}",
        d.terms.len(),
        format_rational(&d.terms[0].weight)
    );
    assert_eq!(d.terms.len(), 1);

    // All basic arrays of the bipartite system.
    let basics = enumerate_basic_arrays(&sig).unwrap();
    println!(
        "\nbipartite basic arrays after deduplication: {}",
        basics.len()
    );
    assert_eq!(basics.len(), 12);

    // Random mixtures decompose exactly, greedily and by LP.
    let mut rng = StdRng::seed_from_u64(2024);
    for case in 0..5 {
        let mixture = random_total_array_mixture(&sig, 5, &mut rng).unwrap();
        let greedy = greedy_decompose(&mixture).unwrap();
        assert!(greedy.verifies_against(&mixture));
        let weights: Vec<String> = greedy
            .terms
            .iter()
            .map(|t| format_rational(&t.weight))
            .collect();
        println!(
            "mixture {case}: greedy found {} terms with weights {}",
            greedy.terms.len(),
            weights.join(", ")
        );
        match lp_decompose(&mixture).unwrap() {
            LpOutcome::Decomposed(lp) => assert!(lp.verifies_against(&mixture)),
            LpOutcome::Infeasible(_) => panic!("LP disagreed with greedy on mixture {case}"),
        }
    }

    // The randomized protocol reproduces the measurement's statistics
    // exactly, and can be executed trial by trial.
    let protocol = randomized_protocol(&m, &d).unwrap();
    let state = random_local_state(&sig, &mut rng).unwrap();
    let analytic = protocol.outcome_distribution(&state).unwrap();
    let direct = outcome_distribution(&m, &state).unwrap();
    println!(
        "\nprotocol distribution on a random local state: {:?}",
        analytic.iter().map(format_rational).collect::<Vec<_>>()
    );
    assert_eq!(analytic, direct);

    let mut counts = [0u64; 2];
    for _ in 0..2000 {
        let run = protocol.sample(&state, &mut rng).unwrap();
        counts[run.outcome] += 1;
    }
    println!(
        "2000 protocol trials announced outcome 0/1: {}/{}",
        counts[0], counts[1]
    );
}
