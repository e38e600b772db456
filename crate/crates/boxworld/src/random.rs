//! Seeded generators of random box-world objects.
//!
//! Everything here is driven by a caller-supplied RNG, so suites and demos
//! stay reproducible. States come out exactly valid and measurements come
//! out exactly validated by construction: random total arrays are mixtures
//! of wiring arrays, and random measurements split such an array's entries
//! among outcome labels.

use num_traits::Zero;
use rand::Rng;

use crate::error::Result;
use crate::measurements::{Effect, Measurement, TotalArray};
use crate::rational::Rational;
use crate::signature::SystemSignature;
use crate::states::{deterministic_vertices, mix, State};
use crate::tensor::BoxTensor;
use crate::wiring::{tree_total_array, BasicTree};

/// Random rational in `[0, 1]` with denominator at most `max_denominator`.
pub fn random_unit_rational<R: Rng + ?Sized>(rng: &mut R, max_denominator: u32) -> Rational {
    let d = rng.gen_range(1..=max_denominator) as i64;
    let n = rng.gen_range(0..=d);
    Rational::new(n.into(), d.into())
}

/// Random positive weights summing to exactly 1.
pub fn random_convex_weights<R: Rng + ?Sized>(rng: &mut R, count: usize) -> Vec<Rational> {
    assert!(count > 0);
    let numerators: Vec<i64> = (0..count).map(|_| rng.gen_range(1..=20)).collect();
    let total: i64 = numerators.iter().sum();
    numerators
        .into_iter()
        .map(|n| Rational::new(n.into(), total.into()))
        .collect()
}

/// Random single-system state: an independent outcome distribution per
/// fiducial measurement.
pub fn random_single_system_state<R: Rng + ?Sized>(counts: &[usize], rng: &mut R) -> Result<State> {
    let sig = SystemSignature::new(vec![counts.to_vec()])?;
    let mut entries = Vec::with_capacity(sig.entry_count());
    for &k in counts {
        let numerators: Vec<i64> = (0..k).map(|_| rng.gen_range(1..=12)).collect();
        let total: i64 = numerators.iter().sum();
        entries.extend(
            numerators
                .into_iter()
                .map(|n| Rational::new(n.into(), total.into())),
        );
    }
    State::new(BoxTensor::from_values(sig, entries)?)
}

/// Random product state over the signature.
pub fn random_product_state<R: Rng + ?Sized>(sig: &SystemSignature, rng: &mut R) -> Result<State> {
    let mut state: Option<State> = None;
    for counts in sig.subsystems() {
        let factor = random_single_system_state(counts, rng)?;
        state = Some(match state {
            None => factor,
            Some(s) => s.product(&factor),
        });
    }
    Ok(state.expect("signatures are nonempty"))
}

/// Random mixture of a few deterministic product vertices: a random local
/// state.
pub fn random_local_state<R: Rng + ?Sized>(sig: &SystemSignature, rng: &mut R) -> Result<State> {
    let det = deterministic_vertices(sig);
    let terms = rng.gen_range(1..=4.min(det.len()));
    let picks: Vec<State> = (0..terms)
        .map(|_| det.vertices[rng.gen_range(0..det.len())].clone())
        .collect();
    let weights = random_convex_weights(rng, terms);
    mix(&picks, &weights)
}

/// Random wiring over the signature: uniform subsystem order, fiducial
/// choices and leaf labels in `0..outcome_labels`.
pub fn random_basic_tree<R: Rng + ?Sized>(
    sig: &SystemSignature,
    outcome_labels: usize,
    rng: &mut R,
) -> BasicTree {
    fn build<R: Rng + ?Sized>(
        sig: &SystemSignature,
        remaining: &mut Vec<usize>,
        labels: usize,
        rng: &mut R,
    ) -> BasicTree {
        if remaining.is_empty() {
            return BasicTree::leaf(rng.gen_range(0..labels));
        }
        let pick = rng.gen_range(0..remaining.len());
        let subsystem = remaining.remove(pick);
        let fiducial = rng.gen_range(0..sig.fiducial_count(subsystem));
        let children = (0..sig.outcome_count(subsystem, fiducial))
            .map(|_| build(sig, remaining, labels, rng))
            .collect();
        remaining.insert(pick, subsystem);
        BasicTree::node(subsystem, fiducial, children)
    }
    let mut remaining: Vec<usize> = (0..sig.subsystem_count()).collect();
    build(sig, &mut remaining, outcome_labels.max(1), rng)
}

/// Random valid total array: an exact rational mixture of at most
/// `max_terms` wiring arrays.
pub fn random_total_array_mixture<R: Rng + ?Sized>(
    sig: &SystemSignature,
    max_terms: usize,
    rng: &mut R,
) -> Result<TotalArray> {
    let terms = rng.gen_range(1..=max_terms.max(1));
    let weights = random_convex_weights(rng, terms);
    let mut acc = BoxTensor::zeros(sig.clone());
    for w in &weights {
        let tree = random_basic_tree(sig, 1, rng);
        let array = tree_total_array(&tree, sig)?;
        acc = acc.add(&array.tensor().scale(w))?;
    }
    TotalArray::new(acc, Rational::new(1.into(), 1.into()))
}

/// Random valid measurement with `outcomes` effects: a random valid total
/// array whose entries are split among the outcome labels by random exact
/// proportions.
pub fn random_measurement<R: Rng + ?Sized>(
    sig: &SystemSignature,
    outcomes: usize,
    max_terms: usize,
    rng: &mut R,
) -> Result<Measurement> {
    assert!(outcomes > 0);
    let total = random_total_array_mixture(sig, max_terms, rng)?;
    let mut effect_entries: Vec<Vec<Rational>> =
        vec![Vec::with_capacity(sig.entry_count()); outcomes];
    for (_, _, v) in total.tensor().iter() {
        if v.is_zero() {
            for entries in effect_entries.iter_mut() {
                entries.push(Rational::new(0.into(), 1.into()));
            }
            continue;
        }
        let split = random_convex_weights(rng, outcomes);
        for (entries, share) in effect_entries.iter_mut().zip(split) {
            entries.push(v * share);
        }
    }
    let effects: Result<Vec<Effect>> = effect_entries
        .into_iter()
        .map(|entries| Effect::new(BoxTensor::from_values(sig.clone(), entries)?))
        .collect();
    Measurement::new(effects?)
}

/// Random effect with independent entries in `[0, 1]`; as part of a list it
/// almost never forms a valid measurement, which makes it useful as a
/// negative test case.
pub fn random_effect<R: Rng + ?Sized>(sig: &SystemSignature, rng: &mut R) -> Effect {
    Effect::new(BoxTensor::from_fn(sig.clone(), |_, _| {
        random_unit_rational(rng, 8)
    }))
    .expect("entries are drawn inside [0, 1]")
}
