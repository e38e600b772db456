//! Exact vertex enumeration of the no-signalling polytope.
//!
//! Enumerates all extreme points of the bipartite two-setting two-outcome
//! state space, classifies them into deterministic products and PR-type
//! boxes, and shows that every nonlocal vertex is a local relabelling of
//! the PR box.
//!
//! Run: `cargo run --example vertex_enumeration`

use boxworld::states::{chsh, is_local, nosig_vertices, pr_box, LocalityResult, VertexClass};
use boxworld::tensor::Relabelling;
use boxworld::SystemSignature;

fn main() {
    let sig = SystemSignature::binary(2, 2);
    let set = nosig_vertices(&sig).unwrap();
    let det = set.count_class(VertexClass::DeterministicLocal);
    let non = set.count_class(VertexClass::Nonlocal);
    println!(
        "no-signalling polytope over {:?}: {} vertices = {det} deterministic + {non} nonlocal",
        sig.subsystems(),
        set.len()
    );
    assert_eq!((set.len(), det, non), (24, 16, 8));

    println!("\nCHSH values and locality per vertex class:");
    let mut nonlocal_chsh = Vec::new();
    for (v, class) in set.vertices.iter().zip(&set.classes) {
        let s = chsh(v).unwrap();
        match class {
            VertexClass::DeterministicLocal => {
                assert!(matches!(is_local(v).unwrap(), LocalityResult::Local { .. }));
            }
            VertexClass::Nonlocal => {
                assert!(matches!(
                    is_local(v).unwrap(),
                    LocalityResult::Nonlocal { .. }
                ));
                nonlocal_chsh.push(boxworld::format_rational(&s));
            }
        }
    }
    println!(
        "  nonlocal vertices have CHSH values: {}",
        nonlocal_chsh.join(", ")
    );

    // Every nonlocal vertex is the PR box up to a local relabelling: flip
    // outcomes per (subsystem, fiducial) and search the orbit.
    let pr = pr_box();
    let mut orbit = std::collections::BTreeSet::new();
    let mut queue = vec![pr.tensor().clone()];
    while let Some(t) = queue.pop() {
        if !orbit.insert(t.entries().to_vec()) {
            continue;
        }
        for subsystem in 0..2 {
            for fiducial in 0..2 {
                let mut rel = Relabelling::identity(&sig);
                rel.subsystems[subsystem].outcome_perms[fiducial] = vec![1, 0];
                queue.push(t.relabel(&rel).unwrap());
            }
        }
    }
    println!("\nPR relabelling orbit size: {}", orbit.len());
    assert_eq!(orbit.len(), 8);
    for (v, class) in set.vertices.iter().zip(&set.classes) {
        if *class == VertexClass::Nonlocal {
            assert!(orbit.contains(&v.tensor().entries().to_vec()));
        }
    }
    println!("every nonlocal vertex is a relabelled PR box");

    // Single systems have no nonlocal vertices at all.
    let single = nosig_vertices(&SystemSignature::new(vec![vec![2, 2]]).unwrap()).unwrap();
    println!(
        "\nsingle system [[2,2]]: {} vertices, all deterministic",
        single.len()
    );
    assert_eq!(single.count_class(VertexClass::Nonlocal), 0);
}
