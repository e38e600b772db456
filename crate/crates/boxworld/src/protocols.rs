//! Entanglement-swapping harness and transformation machinery.
//!
//! The swapping setup: Alice and Bob share systems `A, B1` in state `P`,
//! Bob and Charlie share `B2, C` in state `Q`, and Bob measures `B1 B2`
//! jointly. For every outcome, the collapsed `A C` state decomposes as a
//! convex combination of products of collapsed single-side states with
//! coefficients proportional to
//! `C^r = R_r(b1 b2|y1 y2) · P(b1|y1) · Q(b2|y2)`,
//! which are nonnegative because effects are entrywise nonnegative. The
//! collapsed state is therefore always separable: no measurement of Bob's
//! can leave Alice and Charlie entangled. [`verify_no_swapping`] checks the
//! reconstruction and the separability outcome by outcome, exactly.

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::measurements::{validate_measurement, Measurement};
use crate::rational::Rational;
use crate::signature::SystemSignature;
use crate::states::{collapse, is_local, nosig_vertices, validate_state, LocalityResult, State};
use crate::tensor::BoxTensor;

// ---------------------------------------------------------------------------
// Swap scenario
// ---------------------------------------------------------------------------

/// `P` on `A ⊎ B1`, `Q` on `B2 ⊎ C`, and Bob's validated measurement on
/// `B1 ⊎ B2`. `b1_count` and `b2_count` say how many trailing subsystems of
/// `P` form `B1` and how many leading subsystems of `Q` form `B2`.
#[derive(Clone, Debug)]
pub struct SwapScenario {
    p: State,
    q: State,
    bob: Measurement,
    b1_count: usize,
    b2_count: usize,
}

impl SwapScenario {
    pub fn new(
        p: State,
        q: State,
        bob: Measurement,
        b1_count: usize,
        b2_count: usize,
    ) -> Result<Self> {
        let np = p.signature().subsystem_count();
        let nq = q.signature().subsystem_count();
        if b1_count == 0 || b1_count >= np {
            return Err(Error::Shape(format!(
                "b1_count {b1_count} must leave Alice at least one subsystem of {np}"
            )));
        }
        if b2_count == 0 || b2_count >= nq {
            return Err(Error::Shape(format!(
                "b2_count {b2_count} must leave Charlie at least one subsystem of {nq}"
            )));
        }
        let b1_sig = p
            .signature()
            .restrict(&((np - b1_count)..np).collect::<Vec<_>>())?;
        let b2_sig = q.signature().restrict(&(0..b2_count).collect::<Vec<_>>())?;
        let expected = b1_sig.concat(&b2_sig);
        if bob.signature() != &expected {
            return Err(Error::SignatureMismatch(format!(
                "Bob's measurement expects signature {:?}, scenario provides {:?}",
                bob.signature().subsystems(),
                expected.subsystems()
            )));
        }
        let diagnostics = validate_measurement(&bob);
        if !diagnostics.is_valid() {
            return Err(Error::InvalidMeasurement(diagnostics.failures.join("; ")));
        }
        Ok(Self {
            p,
            q,
            bob,
            b1_count,
            b2_count,
        })
    }

    /// Infers the `B1`/`B2` split from the signatures when it is unique.
    pub fn with_inferred_split(p: State, q: State, bob: Measurement) -> Result<Self> {
        let np = p.signature().subsystem_count();
        let nq = q.signature().subsystem_count();
        let nb = bob.signature().subsystem_count();
        let mut matches = Vec::new();
        for b1 in 1..np {
            let Some(b2) = nb.checked_sub(b1) else {
                continue;
            };
            if b2 == 0 || b2 >= nq {
                continue;
            }
            let b1_sig = p
                .signature()
                .restrict(&((np - b1)..np).collect::<Vec<_>>())?;
            let b2_sig = q.signature().restrict(&(0..b2).collect::<Vec<_>>())?;
            if &b1_sig.concat(&b2_sig) == bob.signature() {
                matches.push((b1, b2));
            }
        }
        match matches.as_slice() {
            [(b1, b2)] => Self::new(p, q, bob, *b1, *b2),
            [] => Err(Error::SignatureMismatch(
                "no B1/B2 split matches Bob's signature".into(),
            )),
            _ => Err(Error::Shape(
                "ambiguous B1/B2 split; specify b1_count explicitly".into(),
            )),
        }
    }

    pub fn p(&self) -> &State {
        &self.p
    }

    pub fn q(&self) -> &State {
        &self.q
    }

    pub fn bob(&self) -> &Measurement {
        &self.bob
    }

    pub fn b1_count(&self) -> usize {
        self.b1_count
    }

    pub fn b2_count(&self) -> usize {
        self.b2_count
    }

    fn a_subsystems(&self) -> Vec<usize> {
        (0..self.p.signature().subsystem_count() - self.b1_count).collect()
    }

    fn b1_subsystems(&self) -> Vec<usize> {
        let np = self.p.signature().subsystem_count();
        ((np - self.b1_count)..np).collect()
    }

    fn b2_subsystems(&self) -> Vec<usize> {
        (0..self.b2_count).collect()
    }

    fn c_subsystems(&self) -> Vec<usize> {
        (self.b2_count..self.q.signature().subsystem_count()).collect()
    }

    pub fn a_signature(&self) -> SystemSignature {
        self.p
            .signature()
            .restrict(&self.a_subsystems())
            .expect("A part is nonempty")
    }

    pub fn c_signature(&self) -> SystemSignature {
        self.q
            .signature()
            .restrict(&self.c_subsystems())
            .expect("C part is nonempty")
    }

    pub fn ac_signature(&self) -> SystemSignature {
        self.a_signature().concat(&self.c_signature())
    }

    /// Iterates all `(y1, b1)` pairs on the `B1` part: a joint setting of
    /// `B1` together with a joint outcome valid under it.
    fn b1_pairs(&self) -> Vec<(Vec<usize>, Vec<usize>)> {
        let sig = self
            .p
            .signature()
            .restrict(&self.b1_subsystems())
            .expect("B1 part is nonempty");
        sig.settings()
            .flat_map(|y| {
                sig.outcomes(&y)
                    .map(move |b| (y.clone(), b))
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    fn b2_pairs(&self) -> Vec<(Vec<usize>, Vec<usize>)> {
        let sig = self
            .q
            .signature()
            .restrict(&self.b2_subsystems())
            .expect("B2 part is nonempty");
        sig.settings()
            .flat_map(|y| {
                sig.outcomes(&y)
                    .map(move |b| (y.clone(), b))
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    /// Probability of `B1` showing outcomes `b1` under settings `y1`
    /// (evaluated with Alice's settings pinned to 0; no-signalling makes the
    /// choice immaterial).
    fn b1_outcome_probability(&self, y1: &[usize], b1: &[usize]) -> Rational {
        marginal_probability(&self.p, &self.b1_subsystems(), y1, b1)
    }

    fn b2_outcome_probability(&self, y2: &[usize], b2: &[usize]) -> Rational {
        marginal_probability(&self.q, &self.b2_subsystems(), y2, b2)
    }
}

/// `Σ_rest P(rest, given | 0, settings)`: the probability of a joint outcome
/// on a subsystem subset under its settings.
fn marginal_probability(
    state: &State,
    subsystems: &[usize],
    settings: &[usize],
    outcomes: &[usize],
) -> Rational {
    let sig = state.signature();
    let n = sig.subsystem_count();
    let complement: Vec<usize> = (0..n).filter(|i| !subsystems.contains(i)).collect();
    let reduced = sig
        .restrict(&complement)
        .expect("subset is proper, complement nonempty");
    let zeros = vec![0; complement.len()];
    let x = crate::signature::merge_by_subsystem(n, subsystems, settings, &complement, &zeros);
    let mut acc = Rational::zero();
    for a_hat in reduced.outcomes(&zeros) {
        let a = crate::signature::merge_by_subsystem(n, subsystems, outcomes, &complement, &a_hat);
        acc += state.tensor().get(&a, &x);
    }
    acc
}

// ---------------------------------------------------------------------------
// Swap evaluation
// ---------------------------------------------------------------------------

/// Exact joint tensor `Pr(r, a, c | x, z)` over the `A ⊎ C` signature for a
/// fixed Bob outcome `r`:
/// `Σ_{b1 y1 b2 y2} R_r(b1 b2|y1 y2) P(a b1|x y1) Q(b2 c|y2 z)`.
pub fn swap_joint_distribution(s: &SwapScenario, r: usize) -> Result<BoxTensor> {
    if r >= s.bob.outcome_count() {
        return Err(Error::Shape(format!(
            "outcome {r} out of range for {} outcomes",
            s.bob.outcome_count()
        )));
    }
    let effect = &s.bob.effects()[r];
    let na = s.a_subsystems().len();
    let b1_pairs = s.b1_pairs();
    let b2_pairs = s.b2_pairs();

    Ok(BoxTensor::from_fn(s.ac_signature(), |ac, xz| {
        let (a, c) = ac.split_at(na);
        let (x, z) = xz.split_at(na);
        let mut acc = Rational::zero();
        for (y1, b1) in &b1_pairs {
            for (y2, b2) in &b2_pairs {
                let r_val = effect.tensor().get(
                    &[b1.as_slice(), b2.as_slice()].concat(),
                    &[y1.as_slice(), y2.as_slice()].concat(),
                );
                if r_val.is_zero() {
                    continue;
                }
                let p_val =
                    s.p.tensor()
                        .get(&[a, b1.as_slice()].concat(), &[x, y1.as_slice()].concat());
                if p_val.is_zero() {
                    continue;
                }
                let q_val =
                    s.q.tensor()
                        .get(&[b2.as_slice(), c].concat(), &[y2.as_slice(), z].concat());
                if q_val.is_zero() {
                    continue;
                }
                acc += r_val * p_val * q_val;
            }
        }
        acc
    }))
}

/// Probability of Bob seeing outcome `r`, independent of the far settings.
pub fn swap_outcome_probability(s: &SwapScenario, r: usize) -> Result<Rational> {
    let joint = swap_joint_distribution(s, r)?;
    let sig = joint.signature().clone();
    let zeros = vec![0; sig.subsystem_count()];
    let mut acc = Rational::zero();
    for a in sig.outcomes(&zeros) {
        acc += joint.get(&a, &zeros);
    }
    Ok(acc)
}

/// Collapsed `A C` state given Bob's outcome `r`:
/// `P_r(a c|x z) = Pr(r a c|x z) / Pr(r)`.
pub fn collapsed_ac_state(s: &SwapScenario, r: usize) -> Result<State> {
    let joint = swap_joint_distribution(s, r)?;
    let prob = swap_outcome_probability(s, r)?;
    if prob.is_zero() {
        return Err(Error::ZeroProbability(format!("Bob outcome {r}")));
    }
    State::new(joint.scale(&(Rational::one() / prob)))
}

/// One product term of the separable decomposition of a collapsed state.
#[derive(Clone, Debug)]
pub struct LambdaTerm {
    /// Convex coefficient `λ = C^r / Σ C^r`, strictly positive.
    pub weight: Rational,
    pub b1_settings: Vec<usize>,
    pub b1_outcomes: Vec<usize>,
    pub b2_settings: Vec<usize>,
    pub b2_outcomes: Vec<usize>,
    /// Alice's collapsed state given `(b1 | y1)`.
    pub a_state: State,
    /// Charlie's collapsed state given `(b2 | y2)`.
    pub c_state: State,
}

impl LambdaTerm {
    pub fn product_tensor(&self) -> BoxTensor {
        self.a_state
            .tensor()
            .tensor_product(self.c_state.tensor())
            .scale(&self.weight)
    }
}

/// Separable decomposition of the collapsed `A C` state for outcome `r`:
/// terms `λ^r · P_{b1 y1} ⊗ Q_{b2 y2}` with
/// `λ^r ∝ C^r = R_r(b1 b2|y1 y2) P(b1|y1) Q(b2|y2) ≥ 0`.
/// Terms with `C^r = 0` (including vanishing collapse denominators) carry no
/// weight and are dropped.
pub fn lambda_decomposition(s: &SwapScenario, r: usize) -> Result<Vec<LambdaTerm>> {
    if r >= s.bob.outcome_count() {
        return Err(Error::Shape(format!(
            "outcome {r} out of range for {} outcomes",
            s.bob.outcome_count()
        )));
    }
    let effect = &s.bob.effects()[r];

    let mut raw: Vec<(Rational, Vec<usize>, Vec<usize>, Vec<usize>, Vec<usize>)> = Vec::new();
    let mut total = Rational::zero();
    for (y1, b1) in s.b1_pairs() {
        let p_b1 = s.b1_outcome_probability(&y1, &b1);
        if p_b1.is_zero() {
            continue;
        }
        for (y2, b2) in s.b2_pairs() {
            let q_b2 = s.b2_outcome_probability(&y2, &b2);
            if q_b2.is_zero() {
                continue;
            }
            let r_val = effect.tensor().get(
                &[b1.as_slice(), b2.as_slice()].concat(),
                &[y1.as_slice(), y2.as_slice()].concat(),
            );
            if r_val.is_zero() {
                continue;
            }
            let coefficient = r_val * &p_b1 * &q_b2;
            total += &coefficient;
            raw.push((coefficient, y1.clone(), b1.clone(), y2, b2));
        }
    }
    if total.is_zero() {
        return Err(Error::ZeroProbability(format!("Bob outcome {r}")));
    }

    let mut terms = Vec::with_capacity(raw.len());
    for (coefficient, y1, b1, y2, b2) in raw {
        let a_state = collapse(&s.p, &s.b1_subsystems(), &y1, &b1)?;
        let c_state = collapse(&s.q, &s.b2_subsystems(), &y2, &b2)?;
        terms.push(LambdaTerm {
            weight: coefficient / &total,
            b1_settings: y1,
            b1_outcomes: b1,
            b2_settings: y2,
            b2_outcomes: b2,
            a_state,
            c_state,
        });
    }
    Ok(terms)
}

/// Per-outcome result of the swapping check.
#[derive(Clone, Debug)]
pub struct SwapOutcomeReport {
    pub outcome: usize,
    pub probability: Rational,
    /// Whether the checks ran (outcomes of probability zero are skipped).
    pub evaluated: bool,
    /// `Σ λ (P_{b1y1} ⊗ Q_{b2y2})` equals the collapsed state entrywise.
    pub reconstruction_exact: bool,
    /// The collapsed state passed the exact hull-membership test.
    pub separable: bool,
    pub lambda_terms: usize,
}

#[derive(Clone, Debug)]
pub struct SwapReport {
    pub outcomes: Vec<SwapOutcomeReport>,
}

impl SwapReport {
    pub fn all_separable(&self) -> bool {
        self.outcomes
            .iter()
            .all(|o| !o.evaluated || (o.separable && o.reconstruction_exact))
    }
}

/// For every Bob outcome of positive probability: reconstructs the
/// collapsed `A C` state from its λ-decomposition (exact entrywise
/// equality) and confirms separability by exact LP membership in the hull
/// of deterministic vertices.
pub fn verify_no_swapping(s: &SwapScenario) -> Result<SwapReport> {
    let mut outcomes = Vec::with_capacity(s.bob.outcome_count());
    for r in 0..s.bob.outcome_count() {
        let probability = swap_outcome_probability(s, r)?;
        if probability.is_zero() {
            outcomes.push(SwapOutcomeReport {
                outcome: r,
                probability,
                evaluated: false,
                reconstruction_exact: false,
                separable: false,
                lambda_terms: 0,
            });
            continue;
        }
        let collapsed = collapsed_ac_state(s, r)?;
        let terms = lambda_decomposition(s, r)?;

        let mut rebuilt = BoxTensor::zeros(collapsed.signature().clone());
        let mut weight_sum = Rational::zero();
        for t in &terms {
            rebuilt = rebuilt.add(&t.product_tensor())?;
            weight_sum += &t.weight;
        }
        let reconstruction_exact = weight_sum.is_one() && &rebuilt == collapsed.tensor();

        let separable = matches!(is_local(&collapsed)?, LocalityResult::Local { .. });
        outcomes.push(SwapOutcomeReport {
            outcome: r,
            probability,
            evaluated: true,
            reconstruction_exact,
            separable,
            lambda_terms: terms.len(),
        });
    }
    Ok(SwapReport { outcomes })
}

// ---------------------------------------------------------------------------
// Transformations
// ---------------------------------------------------------------------------

/// Linear map on single-system state tensors,
/// `P'(a'|x') = Σ_{a,x} T(a'|x', a|x) P(a|x)`, stored densely with the
/// output index major.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Transformation {
    input_signature: SystemSignature,
    output_signature: SystemSignature,
    /// `entries[out_rank * in_count + in_rank]` in canonical entry orders.
    entries: Vec<Rational>,
}

impl Transformation {
    pub fn new(
        input_signature: SystemSignature,
        output_signature: SystemSignature,
        entries: Vec<Rational>,
    ) -> Result<Self> {
        let expected = input_signature.entry_count() * output_signature.entry_count();
        if entries.len() != expected {
            return Err(Error::Shape(format!(
                "transformation needs {expected} entries, got {}",
                entries.len()
            )));
        }
        Ok(Self {
            input_signature,
            output_signature,
            entries,
        })
    }

    /// `T(a'|x', a|x) = δ_{a,a'} δ_{x,x'}`.
    pub fn identity(sig: &SystemSignature) -> Self {
        let n = sig.entry_count();
        let mut entries = vec![Rational::zero(); n * n];
        for i in 0..n {
            entries[i * n + i] = Rational::one();
        }
        Self {
            input_signature: sig.clone(),
            output_signature: sig.clone(),
            entries,
        }
    }

    /// The constant map sending every state to `target`:
    /// `T(a'|x', a|x) = target(a'|x') · [x = 0]`, which contracts the input
    /// against its normalisation.
    pub fn constant(target: &State) -> Self {
        let out_sig = target.signature().clone();
        let in_sig = out_sig.clone();
        let in_count = in_sig.entry_count();
        let mut entries = Vec::with_capacity(in_count * out_sig.entry_count());
        let zero_setting = vec![0; in_sig.subsystem_count()];
        for (a_out, x_out) in out_sig.entries() {
            let t_val = target.tensor().get(&a_out, &x_out).clone();
            for (_a_in, x_in) in in_sig.entries() {
                entries.push(if x_in == zero_setting {
                    t_val.clone()
                } else {
                    Rational::zero()
                });
            }
        }
        Self {
            input_signature: in_sig,
            output_signature: out_sig,
            entries,
        }
    }

    /// The permutation map induced by a relabelling of the signature.
    pub fn from_relabelling(
        sig: &SystemSignature,
        relabelling: &crate::tensor::Relabelling,
    ) -> Result<Self> {
        relabelling.validate(sig)?;
        let n = sig.entry_count();
        let offsets = sig.block_offsets();
        let flat = |a: &[usize], x: &[usize]| offsets[sig.setting_rank(x)] + sig.outcome_rank(a, x);
        let mut entries = vec![Rational::zero(); n * n];
        for (a, x) in sig.entries() {
            let (a_new, x_new) = relabelling.apply_indices(&a, &x);
            let out_rank = flat(&a_new, &x_new);
            let in_rank = flat(&a, &x);
            entries[out_rank * n + in_rank] = Rational::one();
        }
        Self::new(sig.clone(), sig.clone(), entries)
    }

    pub fn input_signature(&self) -> &SystemSignature {
        &self.input_signature
    }

    pub fn output_signature(&self) -> &SystemSignature {
        &self.output_signature
    }

    pub fn entries(&self) -> &[Rational] {
        &self.entries
    }

    fn in_rank(&self, a: &[usize], x: &[usize]) -> usize {
        let sig = &self.input_signature;
        sig.block_offsets()[sig.setting_rank(x)] + sig.outcome_rank(a, x)
    }

    /// Applies the map to a bare single-system tensor.
    pub fn apply_tensor(&self, input: &BoxTensor) -> Result<BoxTensor> {
        if input.signature() != &self.input_signature {
            return Err(Error::SignatureMismatch(
                "transformation input signature".into(),
            ));
        }
        let in_count = self.input_signature.entry_count();
        let mut out_rank = 0usize;
        let out = BoxTensor::from_fn(self.output_signature.clone(), |_, _| {
            let row = &self.entries[out_rank * in_count..(out_rank + 1) * in_count];
            let mut acc = Rational::zero();
            for (t, v) in row.iter().zip(input.entries()) {
                if !t.is_zero() && !v.is_zero() {
                    acc += t * v;
                }
            }
            out_rank += 1;
            acc
        });
        Ok(out)
    }
}

/// True when the map sends every extreme point of the input state space to
/// a valid state; by linearity and convexity this extends to the whole
/// polytope, and conditioning arguments extend it to applications on one
/// subsystem of any joint state.
pub fn validate_transformation(t: &Transformation) -> Result<bool> {
    let vertices = nosig_vertices(t.input_signature())?;
    for v in &vertices.vertices {
        let image = t.apply_tensor(v.tensor())?;
        if !validate_state(&image).is_valid() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Applies a validated single-subsystem transformation to `subsystem` of a
/// joint state:
/// `P'(a' â|x' x̂) = Σ_{a_k, x_k} T(a'|x', a_k|x_k) P(a_k â|x_k x̂)`.
pub fn apply_transformation(t: &Transformation, p: &State, subsystem: usize) -> Result<State> {
    let sig = p.signature();
    let n = sig.subsystem_count();
    if subsystem >= n {
        return Err(Error::Shape(format!(
            "subsystem {subsystem} out of range for {n} subsystems"
        )));
    }
    if t.input_signature().subsystem_count() != 1 || t.output_signature().subsystem_count() != 1 {
        return Err(Error::Shape(
            "apply_transformation expects a single-subsystem transformation".into(),
        ));
    }
    let local = sig.restrict(&[subsystem])?;
    if &local != t.input_signature() {
        return Err(Error::SignatureMismatch(format!(
            "transformation acts on {:?}, subsystem {subsystem} has {:?}",
            t.input_signature().subsystems(),
            local.subsystems()
        )));
    }
    if !validate_transformation(t)? {
        return Err(Error::InvalidTransformation(
            "the map sends some valid state outside the state space".into(),
        ));
    }

    let mut out_subsystems: Vec<Vec<usize>> = sig.subsystems().to_vec();
    out_subsystems[subsystem] = t.output_signature().subsystems()[0].clone();
    let out_sig = SystemSignature::new(out_subsystems)?;

    let in_local = t.input_signature().clone();
    let in_count = in_local.entry_count();
    let transformed = BoxTensor::from_fn(out_sig, |a_out, x_out| {
        let mut acc = Rational::zero();
        let mut a = a_out.to_vec();
        let mut x = x_out.to_vec();
        for xk in 0..in_local.fiducial_count(0) {
            for ak in 0..in_local.outcome_count(0, xk) {
                let t_val = &t.entries
                    [t_out_rank(t, a_out, x_out, subsystem) * in_count + t.in_rank(&[ak], &[xk])];
                if t_val.is_zero() {
                    continue;
                }
                a[subsystem] = ak;
                x[subsystem] = xk;
                let p_val = p.tensor().get(&a, &x);
                if !p_val.is_zero() {
                    acc += t_val * p_val;
                }
            }
        }
        acc
    });
    State::new(transformed)
}

fn t_out_rank(t: &Transformation, a_out: &[usize], x_out: &[usize], subsystem: usize) -> usize {
    let sig = t.output_signature();
    sig.block_offsets()[sig.setting_rank(&[x_out[subsystem]])]
        + sig.outcome_rank(&[a_out[subsystem]], &[x_out[subsystem]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurements::{total_array, Effect};
    use crate::rational::{integer, ratio};
    use crate::states::{chsh, deterministic_vertices, maximally_mixed, pr_box};
    use crate::tensor::{Relabelling, SubsystemRelabelling};
    use crate::wiring::{tree_total_array, BasicTree};
    use num_traits::Signed;

    /// Bob measures both his subsystems with fiducial 0 and reports the
    /// outcome pair: four unit-entry effects under the setting (0, 0).
    fn product_fiducial_bob() -> Measurement {
        let sig = SystemSignature::binary(2, 2);
        let effects: Vec<Effect> = (0..2)
            .flat_map(|b1| (0..2).map(move |b2| (b1, b2)))
            .map(|(b1, b2)| Effect::unit_entry(&sig, &[b1, b2], &[0, 0], integer(1)).unwrap())
            .collect();
        Measurement::new(effects).unwrap()
    }

    fn pr_pr_scenario(bob: Measurement) -> SwapScenario {
        SwapScenario::new(pr_box(), pr_box(), bob, 1, 1).unwrap()
    }

    #[test]
    fn product_fiducial_bob_is_a_valid_measurement() {
        let bob = product_fiducial_bob();
        assert!(validate_measurement(&bob).is_valid());
        let tree = BasicTree::node(
            0,
            0,
            vec![
                BasicTree::node(1, 0, vec![BasicTree::leaf(0), BasicTree::leaf(1)]),
                BasicTree::node(1, 0, vec![BasicTree::leaf(2), BasicTree::leaf(3)]),
            ],
        );
        let array = tree_total_array(&tree, &SystemSignature::binary(2, 2)).unwrap();
        assert_eq!(total_array(&bob).tensor(), array.tensor());
    }

    #[test]
    fn joint_distribution_normalises_per_far_settings() {
        let s = pr_pr_scenario(product_fiducial_bob());
        let sig = s.ac_signature();
        for x in 0..2 {
            for z in 0..2 {
                let mut acc = Rational::zero();
                for r in 0..s.bob().outcome_count() {
                    let joint = swap_joint_distribution(&s, r).unwrap();
                    for a in 0..2 {
                        for c in 0..2 {
                            acc += joint.get(&[a, c], &[x, z]);
                        }
                    }
                }
                assert!(acc.is_one(), "normalisation fails at (x={x}, z={z})");
            }
        }
        let _ = sig;
    }

    #[test]
    fn joint_distribution_matches_two_path_conditioning() {
        // With Bob measuring product fiducials, Pr((b1,b2), a, c | x, z)
        // should factor as P(a b1|x 0) Q(b2 c|0 z).
        let s = pr_pr_scenario(product_fiducial_bob());
        for (r, (b1, b2)) in [(0, (0, 0)), (1, (0, 1)), (2, (1, 0)), (3, (1, 1))] {
            let joint = swap_joint_distribution(&s, r).unwrap();
            for (ac, xz, v) in joint.iter() {
                let direct = s.p().tensor().get(&[ac[0], b1], &[xz[0], 0])
                    * s.q().tensor().get(&[b2, ac[1]], &[0, xz[1]]);
                assert_eq!(v, &direct);
            }
        }
    }

    #[test]
    fn collapsed_state_is_product_for_product_fiducial_bob() {
        let s = pr_pr_scenario(product_fiducial_bob());
        for r in 0..4 {
            let collapsed = collapsed_ac_state(&s, r).unwrap();
            let terms = lambda_decomposition(&s, r).unwrap();
            // C^r is supported on a single (y1, b1, y2, b2).
            assert_eq!(terms.len(), 1);
            assert_eq!(terms[0].weight, integer(1));
            assert_eq!(&terms[0].product_tensor(), collapsed.tensor());
            // Product states stay within the local CHSH range.
            let value = chsh(&collapsed).unwrap();
            assert!(value.abs() <= integer(2));
        }
    }

    #[test]
    fn swap_report_is_fully_separable_for_pr_boxes() {
        let s = pr_pr_scenario(product_fiducial_bob());
        let report = verify_no_swapping(&s).unwrap();
        assert!(report.all_separable());
        let total: Rational = report.outcomes.iter().map(|o| o.probability.clone()).sum();
        assert!(total.is_one());
    }

    #[test]
    fn product_inputs_collapse_to_product_states() {
        // When P and Q are themselves product states, conditioning cannot
        // correlate A with C: the collapsed state factorizes for every Bob
        // outcome, whatever his measurement.
        use crate::random::{random_measurement, random_product_state};
        use rand::rngs::StdRng;
        use rand::SeedableRng;

        let mut rng = StdRng::seed_from_u64(67);
        let pair = SystemSignature::binary(2, 2);
        let p = random_product_state(&pair, &mut rng).unwrap();
        let q = random_product_state(&pair, &mut rng).unwrap();
        let bob = random_measurement(&pair, 3, 3, &mut rng).unwrap();
        let s = SwapScenario::new(p, q, bob, 1, 1).unwrap();
        for r in 0..3 {
            if swap_outcome_probability(&s, r).unwrap().is_zero() {
                continue;
            }
            let collapsed = collapsed_ac_state(&s, r).unwrap();
            let a_marginal = collapsed.tensor().marginal(1, 0).unwrap();
            let c_marginal = collapsed.tensor().marginal(0, 0).unwrap();
            assert_eq!(
                &a_marginal.tensor_product(&c_marginal),
                collapsed.tensor(),
                "outcome {r} did not factorize"
            );
        }
    }

    #[test]
    fn far_marginals_ignore_the_other_far_setting() {
        // Σ_c Pr(r a c|x z) is independent of z (and symmetrically for a):
        // the construction inherits no-signalling.
        use crate::random::random_measurement;
        use rand::rngs::StdRng;
        use rand::SeedableRng;
        let mut rng = StdRng::seed_from_u64(61);
        let bob = random_measurement(&SystemSignature::binary(2, 2), 3, 3, &mut rng).unwrap();
        let s = pr_pr_scenario(bob);
        for r in 0..3 {
            let joint = swap_joint_distribution(&s, r).unwrap();
            for x in 0..2 {
                for a in 0..2 {
                    let sum_at = |z: usize| -> Rational {
                        (0..2).map(|c| joint.get(&[a, c], &[x, z]).clone()).sum()
                    };
                    assert_eq!(sum_at(0), sum_at(1), "r={r}, a={a}, x={x}");
                }
            }
        }
    }

    #[test]
    fn apply_transformation_commutes_with_mixing() {
        use crate::states::mix;
        let sig = SystemSignature::new(vec![vec![2, 2]]).unwrap();
        let t = Transformation::constant(&maximally_mixed(&sig));
        let det = deterministic_vertices(&SystemSignature::binary(2, 2));
        let w = vec![ratio(1, 4), ratio(3, 4)];
        let mixed = mix(&det.vertices[..2].to_vec(), &w).unwrap();
        let lhs = apply_transformation(&t, &mixed, 0).unwrap();
        let rhs = mix(
            &[
                apply_transformation(&t, &det.vertices[0], 0).unwrap(),
                apply_transformation(&t, &det.vertices[1], 0).unwrap(),
            ],
            &w,
        )
        .unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn zero_probability_outcome_errors() {
        // An effect that never fires on the PR⊗PR marginals: unit entry at
        // (b1 b2) = (0,0) under setting (1,1) where the PR marginals are
        // uniform... every unit entry fires with probability 1/4 there.
        // Use a two-outcome split instead: all weight on outcome 0.
        let sig = SystemSignature::binary(2, 2);
        let all = Effect::setting_indicator(&sig, &[0, 0]).unwrap();
        let none = Effect::new(BoxTensor::zeros(sig.clone())).unwrap();
        let bob = Measurement::new(vec![all, none]).unwrap();
        let s = pr_pr_scenario(bob);
        assert!(swap_outcome_probability(&s, 1).unwrap().is_zero());
        assert!(matches!(
            collapsed_ac_state(&s, 1),
            Err(Error::ZeroProbability(_))
        ));
        let report = verify_no_swapping(&s).unwrap();
        assert!(!report.outcomes[1].evaluated);
        assert!(report.all_separable());
    }

    #[test]
    fn split_inference_finds_the_unique_split() {
        let s =
            SwapScenario::with_inferred_split(pr_box(), pr_box(), product_fiducial_bob()).unwrap();
        assert_eq!(s.b1_count(), 1);
        assert_eq!(s.b2_count(), 1);
    }

    #[test]
    fn identity_transformation_preserves_states() {
        let sig = SystemSignature::new(vec![vec![2, 2]]).unwrap();
        let t = Transformation::identity(&sig);
        assert!(validate_transformation(&t).unwrap());
        let pr = pr_box();
        let out = apply_transformation(&t, &pr, 0).unwrap();
        assert_eq!(out.tensor(), pr.tensor());
    }

    #[test]
    fn relabelling_transformation_agrees_with_tensor_relabel() {
        let joint_sig = SystemSignature::binary(2, 2);
        let local_sig = SystemSignature::new(vec![vec![2, 2]]).unwrap();
        // Flip outcomes of fiducial 1 on the local system.
        let local_rel = Relabelling {
            subsystems: vec![SubsystemRelabelling {
                fiducial_perm: vec![0, 1],
                outcome_perms: vec![vec![0, 1], vec![1, 0]],
            }],
        };
        let t = Transformation::from_relabelling(&local_sig, &local_rel).unwrap();
        assert!(validate_transformation(&t).unwrap());

        let pr = pr_box();
        let via_transformation = apply_transformation(&t, &pr, 0).unwrap();
        let joint_rel = Relabelling {
            subsystems: vec![
                local_rel.subsystems[0].clone(),
                SubsystemRelabelling {
                    fiducial_perm: vec![0, 1],
                    outcome_perms: vec![vec![0, 1], vec![0, 1]],
                },
            ],
        };
        let via_relabel = pr.tensor().relabel(&joint_rel).unwrap();
        assert_eq!(via_transformation.tensor(), &via_relabel);
        let _ = joint_sig;
    }

    #[test]
    fn constant_map_forgets_its_input() {
        let sig = SystemSignature::new(vec![vec![2, 2]]).unwrap();
        let target_tensor = BoxTensor::from_values(
            sig.clone(),
            vec![ratio(1, 3), ratio(2, 3), ratio(3, 4), ratio(1, 4)],
        )
        .unwrap();
        let target = State::new(target_tensor).unwrap();
        let t = Transformation::constant(&target);
        assert!(validate_transformation(&t).unwrap());
        for v in deterministic_vertices(&sig).vertices {
            let image = t.apply_tensor(v.tensor()).unwrap();
            assert_eq!(&image, target.tensor());
        }
        // Applied to one side of the PR box: output factorizes into the
        // target times the other marginal.
        let pr = pr_box();
        let out = apply_transformation(&t, &pr, 0).unwrap();
        let other = maximally_mixed(&sig);
        assert_eq!(
            out.tensor(),
            &target.tensor().tensor_product(other.tensor())
        );
    }

    #[test]
    fn negative_image_is_rejected() {
        let sig = SystemSignature::new(vec![vec![2, 2]]).unwrap();
        // Identity with a sign flip on one output entry.
        let n = sig.entry_count();
        let mut entries = vec![Rational::zero(); n * n];
        for i in 0..n {
            entries[i * n + i] = if i == 0 { integer(-1) } else { integer(1) };
        }
        let t = Transformation::new(sig.clone(), sig, entries).unwrap();
        assert!(!validate_transformation(&t).unwrap());
        assert!(matches!(
            apply_transformation(&t, &pr_box(), 0),
            Err(Error::InvalidTransformation(_))
        ));
    }
}
