//! Adaptive wirings ("basic measurements") and decompositions of total
//! measurement arrays into convex combinations of them.
//!
//! A basic measurement performs fiducial measurements on the subsystems one
//! at a time, where each later choice may depend on the outcomes seen so
//! far, and finally announces a label that is a deterministic function of
//! all outcomes. Its total array is 0/1-valued: `M(a|x) = 1` exactly when
//! the run that observes outcomes `a` chooses the settings `x`.
//!
//! Every valid total array on one or two subsystems is a convex combination
//! of basic arrays, and [`greedy_decompose`] constructs one by repeatedly
//! subtracting a scaled basic array that zeroes at least one more entry.
//! From three subsystems up this fails in general; [`lp_decompose`] decides
//! decomposability exactly by LP over the enumerated basic arrays and
//! returns a verified infeasibility certificate when there is none, e.g.
//! for [`counterexample_tripartite`].

use std::collections::{BTreeMap, HashMap};

use num_traits::{One, Signed, Zero};
use rand::Rng;

use crate::error::{Error, Result};
use crate::exact::{self, FeasibilityResult, LinearSystem};
use crate::measurements::{sample_categorical, total_array, Effect, Measurement, TotalArray};
use crate::rational::Rational;
use crate::signature::SystemSignature;
use crate::states::{guards, State};
use crate::tensor::BoxTensor;

// ---------------------------------------------------------------------------
// Basic trees
// ---------------------------------------------------------------------------

/// Adaptive wiring: an internal node measures one subsystem with a chosen
/// fiducial and branches on its outcome; a leaf announces an outcome label.
/// Every root-to-leaf path must measure every subsystem exactly once.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum BasicTree {
    Leaf {
        outcome: usize,
    },
    Node {
        subsystem: usize,
        fiducial: usize,
        /// One subtree per outcome of the chosen fiducial.
        children: Vec<BasicTree>,
    },
}

impl BasicTree {
    pub fn leaf(outcome: usize) -> Self {
        BasicTree::Leaf { outcome }
    }

    pub fn node(subsystem: usize, fiducial: usize, children: Vec<BasicTree>) -> Self {
        BasicTree::Node {
            subsystem,
            fiducial,
            children,
        }
    }

    /// Checks the wiring against a signature: in-range choices, one child
    /// per outcome, every subsystem measured exactly once on every path.
    pub fn validate(&self, sig: &SystemSignature) -> Result<()> {
        fn walk(tree: &BasicTree, sig: &SystemSignature, measured: &mut Vec<bool>) -> Result<()> {
            match tree {
                BasicTree::Leaf { .. } => {
                    if measured.iter().all(|&m| m) {
                        Ok(())
                    } else {
                        Err(Error::Shape(
                            "a wiring path ends before measuring every subsystem".into(),
                        ))
                    }
                }
                BasicTree::Node {
                    subsystem,
                    fiducial,
                    children,
                } => {
                    if *subsystem >= sig.subsystem_count() {
                        return Err(Error::Shape(format!(
                            "wiring node names subsystem {subsystem}, signature has {}",
                            sig.subsystem_count()
                        )));
                    }
                    if measured[*subsystem] {
                        return Err(Error::Shape(format!(
                            "subsystem {subsystem} measured twice on one path"
                        )));
                    }
                    if *fiducial >= sig.fiducial_count(*subsystem) {
                        return Err(Error::Shape(format!(
                            "fiducial {fiducial} out of range on subsystem {subsystem}"
                        )));
                    }
                    let k = sig.outcome_count(*subsystem, *fiducial);
                    if children.len() != k {
                        return Err(Error::Shape(format!(
                            "node on subsystem {subsystem} needs {k} children, has {}",
                            children.len()
                        )));
                    }
                    measured[*subsystem] = true;
                    for child in children {
                        walk(child, sig, measured)?;
                    }
                    measured[*subsystem] = false;
                    Ok(())
                }
            }
        }
        let mut measured = vec![false; sig.subsystem_count()];
        walk(self, sig, &mut measured)
    }

    /// Largest leaf label plus one.
    pub fn outcome_count(&self) -> usize {
        match self {
            BasicTree::Leaf { outcome } => outcome + 1,
            BasicTree::Node { children, .. } => children
                .iter()
                .map(BasicTree::outcome_count)
                .max()
                .unwrap_or(0),
        }
    }

    /// All runs of the wiring: the realized `(a, x, label)` triples, one per
    /// leaf.
    pub fn realizable(
        &self,
        sig: &SystemSignature,
    ) -> Result<Vec<(Vec<usize>, Vec<usize>, usize)>> {
        self.validate(sig)?;
        let n = sig.subsystem_count();
        let mut out = Vec::new();
        let mut a = vec![0usize; n];
        let mut x = vec![0usize; n];
        fn walk(
            tree: &BasicTree,
            a: &mut Vec<usize>,
            x: &mut Vec<usize>,
            out: &mut Vec<(Vec<usize>, Vec<usize>, usize)>,
        ) {
            match tree {
                BasicTree::Leaf { outcome } => out.push((a.clone(), x.clone(), *outcome)),
                BasicTree::Node {
                    subsystem,
                    fiducial,
                    children,
                } => {
                    x[*subsystem] = *fiducial;
                    for (an, child) in children.iter().enumerate() {
                        a[*subsystem] = an;
                        walk(child, a, x, out);
                    }
                }
            }
        }
        walk(self, &mut a, &mut x, &mut out);
        Ok(out)
    }

    /// Replaces every leaf label by `f(a)` on the full realized outcome
    /// vector, i.e. installs the deterministic outcome function of a basic
    /// measurement.
    pub fn with_outcome_fn(
        &self,
        sig: &SystemSignature,
        f: &mut impl FnMut(&[usize]) -> usize,
    ) -> Result<BasicTree> {
        self.validate(sig)?;
        fn walk(
            tree: &BasicTree,
            a: &mut Vec<usize>,
            f: &mut impl FnMut(&[usize]) -> usize,
        ) -> BasicTree {
            match tree {
                BasicTree::Leaf { .. } => BasicTree::leaf(f(a)),
                BasicTree::Node {
                    subsystem,
                    fiducial,
                    children,
                } => {
                    let children = children
                        .iter()
                        .enumerate()
                        .map(|(an, child)| {
                            a[*subsystem] = an;
                            walk(child, a, f)
                        })
                        .collect();
                    BasicTree::node(*subsystem, *fiducial, children)
                }
            }
        }
        let mut a = vec![0usize; sig.subsystem_count()];
        Ok(walk(self, &mut a, f))
    }
}

/// 0/1 total array of a wiring: 1 exactly at the realizable `(a, x)` pairs.
pub fn tree_total_array(tree: &BasicTree, sig: &SystemSignature) -> Result<TotalArray> {
    let realizable = tree.realizable(sig)?;
    let hits: BTreeMap<(Vec<usize>, Vec<usize>), ()> = realizable
        .into_iter()
        .map(|(a, x, _)| ((a, x), ()))
        .collect();
    let tensor = BoxTensor::from_fn(sig.clone(), |a, x| {
        if hits.contains_key(&(a.to_vec(), x.to_vec())) {
            Rational::one()
        } else {
            Rational::zero()
        }
    });
    TotalArray::new(tensor, Rational::one())
}

/// The measurement announced by the wiring's leaf labels: 0/1 effects that
/// partition the tree's total array. The effect list has one entry per
/// label up to the largest label used.
pub fn tree_effects(tree: &BasicTree, sig: &SystemSignature) -> Result<Measurement> {
    let realizable = tree.realizable(sig)?;
    let outcomes = tree.outcome_count();
    let mut hit_per_label: Vec<BTreeMap<(Vec<usize>, Vec<usize>), ()>> =
        vec![BTreeMap::new(); outcomes];
    for (a, x, r) in realizable {
        hit_per_label[r].insert((a, x), ());
    }
    let effects: Result<Vec<Effect>> = hit_per_label
        .into_iter()
        .map(|hits| {
            Effect::new(BoxTensor::from_fn(sig.clone(), |a, x| {
                if hits.contains_key(&(a.to_vec(), x.to_vec())) {
                    Rational::one()
                } else {
                    Rational::zero()
                }
            }))
        })
        .collect();
    Measurement::new(effects?)
}

// ---------------------------------------------------------------------------
// Enumeration
// ---------------------------------------------------------------------------

fn count_trees(sig: &SystemSignature, mask: u32, memo: &mut HashMap<u32, u128>) -> u128 {
    if mask == 0 {
        return 1;
    }
    if let Some(&c) = memo.get(&mask) {
        return c;
    }
    let mut total: u128 = 0;
    for k in 0..sig.subsystem_count() {
        if mask & (1 << k) == 0 {
            continue;
        }
        let rest = mask & !(1 << k);
        let per_child = count_trees(sig, rest, memo);
        for i in 0..sig.fiducial_count(k) {
            let outcomes = sig.outcome_count(k, i) as u32;
            total = total.saturating_add(per_child.saturating_pow(outcomes));
        }
    }
    memo.insert(mask, total);
    total
}

/// All wirings over the signature, leaves labelled 0. Guarded by
/// [`guards::TREE_LIMIT`].
pub fn enumerate_basic_trees(sig: &SystemSignature) -> Result<Vec<BasicTree>> {
    let n = sig.subsystem_count();
    if n > 32 {
        return Err(Error::GuardExceeded {
            what: "subsystems",
            actual: n,
            limit: 32,
        });
    }
    let full_mask: u32 = if n == 32 { u32::MAX } else { (1 << n) - 1 };
    let count = count_trees(sig, full_mask, &mut HashMap::new());
    if count > guards::TREE_LIMIT {
        return Err(Error::GuardExceeded {
            what: "wiring trees",
            actual: count.min(usize::MAX as u128) as usize,
            limit: guards::TREE_LIMIT as usize,
        });
    }

    fn build(
        sig: &SystemSignature,
        mask: u32,
        memo: &mut HashMap<u32, Vec<BasicTree>>,
    ) -> Vec<BasicTree> {
        if mask == 0 {
            return vec![BasicTree::leaf(0)];
        }
        if let Some(trees) = memo.get(&mask) {
            return trees.clone();
        }
        let mut out = Vec::new();
        for k in 0..sig.subsystem_count() {
            if mask & (1 << k) == 0 {
                continue;
            }
            let rest = mask & !(1 << k);
            let subtrees = build(sig, rest, memo);
            for i in 0..sig.fiducial_count(k) {
                let outcomes = sig.outcome_count(k, i);
                // Cartesian product of subtree choices, one per outcome.
                let mut stack: Vec<Vec<BasicTree>> = vec![Vec::new()];
                for _ in 0..outcomes {
                    let mut next = Vec::new();
                    for partial in &stack {
                        for sub in &subtrees {
                            let mut p = partial.clone();
                            p.push(sub.clone());
                            next.push(p);
                        }
                    }
                    stack = next;
                }
                for children in stack {
                    out.push(BasicTree::node(k, i, children));
                }
            }
        }
        memo.insert(mask, out.clone());
        out
    }

    Ok(build(sig, full_mask, &mut HashMap::new()))
}

/// Distinct total arrays of all wirings, canonically sorted by entry
/// vector, each with one representative tree. Distinct trees with equal
/// arrays are interchangeable for decomposition purposes, so duplicates are
/// dropped.
pub fn enumerate_basic_arrays_with_trees(
    sig: &SystemSignature,
) -> Result<Vec<(TotalArray, BasicTree)>> {
    let mut by_entries: BTreeMap<Vec<Rational>, (TotalArray, BasicTree)> = BTreeMap::new();
    for tree in enumerate_basic_trees(sig)? {
        let array = tree_total_array(&tree, sig)?;
        by_entries
            .entry(array.tensor().entries().to_vec())
            .or_insert((array, tree));
    }
    Ok(by_entries.into_values().collect())
}

/// Distinct basic total arrays in canonical order.
pub fn enumerate_basic_arrays(sig: &SystemSignature) -> Result<Vec<TotalArray>> {
    Ok(enumerate_basic_arrays_with_trees(sig)?
        .into_iter()
        .map(|(array, _)| array)
        .collect())
}

// ---------------------------------------------------------------------------
// Decompositions
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct DecompositionTerm {
    /// Strictly positive convex coefficient.
    pub weight: Rational,
    /// Total array of one basic measurement (0/1 entries, weight 1).
    pub array: TotalArray,
    /// A wiring realizing the array.
    pub tree: BasicTree,
}

/// `Σ_i weight_i · array_i` equals the decomposed input exactly, and the
/// weights sum to the input's weight (1 for a normalised total array).
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub signature: SystemSignature,
    pub terms: Vec<DecompositionTerm>,
}

impl Decomposition {
    pub fn total_weight(&self) -> Rational {
        self.terms.iter().map(|t| t.weight.clone()).sum()
    }

    pub fn reconstruct(&self) -> Result<BoxTensor> {
        let mut acc = BoxTensor::zeros(self.signature.clone());
        for t in &self.terms {
            acc = acc.add(&t.array.tensor().scale(&t.weight))?;
        }
        Ok(acc)
    }

    /// Exact entrywise equality with the given array, weights included.
    pub fn verifies_against(&self, m: &TotalArray) -> bool {
        self.reconstruct().map_or(false, |r| {
            &r == m.tensor() && self.total_weight() == *m.weight()
        })
    }
}

/// Constructive decomposition for one or two subsystems: repeatedly
/// subtract a scaled basic array supported inside the positive entries,
/// zeroing at least one entry per step, until nothing remains.
///
/// Deterministic tie-breaking: settings are scanned in canonical index
/// order, the first-subsystem-first branching is preferred, and for every
/// first-stage outcome the smallest second-stage setting with a strictly
/// positive column is chosen.
///
/// For nonnegative inputs that are not valid subnormalised total arrays the
/// loop eventually finds the obstruction pattern - a choice of one zero per
/// block - and reports [`Error::Blocked`]; valid inputs always decompose in
/// at most one iteration per entry.
pub fn greedy_decompose(m: &TotalArray) -> Result<Decomposition> {
    let sig = m.signature().clone();
    match sig.subsystem_count() {
        1 => {}
        2 => {}
        n => return Err(Error::GreedyUnsupported { subsystems: n }),
    }

    let mut residual: Vec<Rational> = m.tensor().entries().to_vec();
    let offsets = sig.block_offsets();
    let flat = |a: &[usize], x: &[usize]| offsets[sig.setting_rank(x)] + sig.outcome_rank(a, x);

    let mut terms: Vec<DecompositionTerm> = Vec::new();
    let entry_limit = sig.entry_count() + 1;
    for _iteration in 0..entry_limit {
        if residual.iter().all(Rational::is_zero) {
            break;
        }
        let step = if sig.subsystem_count() == 1 {
            greedy_step_single(&sig, &residual, &flat)
        } else {
            greedy_step_pair(&sig, &residual, &flat)
        };
        let Some(tree) = step else {
            return Err(Error::Blocked(
                "every remaining setting block contains a zero where the next basic array \
                 would need support; the input is not a valid subnormalised total array"
                    .into(),
            ));
        };
        let array = tree_total_array(&tree, &sig)?;
        // Scale by the smallest residual entry on the array's support.
        let mut k: Option<Rational> = None;
        for (a, x, v) in array.tensor().iter() {
            if v.is_one() {
                let r = &residual[flat(&a, &x)];
                if k.as_ref().map_or(true, |kk| r < kk) {
                    k = Some(r.clone());
                }
            }
        }
        let k = k.expect("basic arrays have nonempty support");
        debug_assert!(k.is_positive());
        for (a, x, v) in array.tensor().iter() {
            if v.is_one() {
                let idx = flat(&a, &x);
                residual[idx] = &residual[idx] - &k;
            }
        }
        terms.push(DecompositionTerm {
            weight: k,
            array,
            tree,
        });
    }
    if !residual.iter().all(Rational::is_zero) {
        // Each step zeroes at least one entry, so this is unreachable; keep
        // the loop bound honest anyway.
        return Err(Error::Blocked(
            "greedy loop exceeded its iteration bound".into(),
        ));
    }

    let decomposition = Decomposition {
        signature: sig,
        terms,
    };
    if !decomposition.verifies_against(m) {
        return Err(Error::Inconsistent(format!(
            "decomposition weights sum to {}, but the input claims weight {}",
            decomposition.total_weight(),
            m.weight()
        )));
    }
    Ok(decomposition)
}

/// Single system: find the first setting whose whole block is positive.
fn greedy_step_single(
    sig: &SystemSignature,
    residual: &[Rational],
    flat: &impl Fn(&[usize], &[usize]) -> usize,
) -> Option<BasicTree> {
    for x in 0..sig.fiducial_count(0) {
        let positive =
            (0..sig.outcome_count(0, x)).all(|a| residual[flat(&[a], &[x])].is_positive());
        if positive {
            let children = (0..sig.outcome_count(0, x))
                .map(|_| BasicTree::leaf(0))
                .collect();
            return Some(BasicTree::node(0, x, children));
        }
    }
    None
}

/// Two subsystems: look for a first-stage setting together with per-outcome
/// second-stage settings whose columns are strictly positive; try measuring
/// subsystem 0 first, then subsystem 1.
fn greedy_step_pair(
    sig: &SystemSignature,
    residual: &[Rational],
    flat: &impl Fn(&[usize], &[usize]) -> usize,
) -> Option<BasicTree> {
    for (first, second) in [(0usize, 1usize), (1usize, 0usize)] {
        'next_fiducial: for xf in 0..sig.fiducial_count(first) {
            let mut children = Vec::with_capacity(sig.outcome_count(first, xf));
            for af in 0..sig.outcome_count(first, xf) {
                let mut chosen: Option<usize> = None;
                'settings: for xs in 0..sig.fiducial_count(second) {
                    for as_ in 0..sig.outcome_count(second, xs) {
                        let (a, x) = if first == 0 {
                            (vec![af, as_], vec![xf, xs])
                        } else {
                            (vec![as_, af], vec![xs, xf])
                        };
                        if !residual[flat(&a, &x)].is_positive() {
                            continue 'settings;
                        }
                    }
                    chosen = Some(xs);
                    break;
                }
                match chosen {
                    Some(xs) => {
                        let leaves = (0..sig.outcome_count(second, xs))
                            .map(|_| BasicTree::leaf(0))
                            .collect();
                        children.push(BasicTree::node(second, xs, leaves));
                    }
                    None => continue 'next_fiducial,
                }
            }
            return Some(BasicTree::node(first, xf, children));
        }
    }
    None
}

/// Exact witness that an array is not a convex combination of basic arrays:
/// a functional `f` and offset `s` with `f·B + s ≤ 0` for every basic array
/// `B` while `f·M + s·weight > 0`.
#[derive(Clone, Debug)]
pub struct InfeasibilityCertificate {
    pub functional: BoxTensor,
    pub offset: Rational,
}

impl InfeasibilityCertificate {
    /// Re-checks the witness by dot products against the enumerated basic
    /// arrays.
    pub fn verify(&self, m: &TotalArray) -> Result<bool> {
        let at_input = self.functional.dot(m.tensor())? + &self.offset * m.weight();
        if !at_input.is_positive() {
            return Ok(false);
        }
        for b in enumerate_basic_arrays(m.signature())? {
            let v = self.functional.dot(b.tensor())? + &self.offset;
            if v.is_positive() {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

#[derive(Clone, Debug)]
pub enum LpOutcome {
    Decomposed(Decomposition),
    Infeasible(InfeasibilityCertificate),
}

/// Decides exactly whether `m` is a nonnegative combination of basic total
/// arrays with coefficients summing to its weight, via phase-1 simplex over
/// the enumerated arrays.
pub fn lp_decompose(m: &TotalArray) -> Result<LpOutcome> {
    let sig = m.signature().clone();
    let basics = enumerate_basic_arrays_with_trees(&sig)?;
    let entry_count = sig.entry_count();

    let rows: Vec<Vec<Rational>> = (0..entry_count)
        .map(|i| {
            basics
                .iter()
                .map(|(b, _)| b.tensor().entries()[i].clone())
                .collect()
        })
        .collect();
    let rhs: Vec<Rational> = m.tensor().entries().to_vec();
    let system = LinearSystem::new(rows, rhs)?.with_sum_row(m.weight().clone());

    match exact::feasible(&system) {
        FeasibilityResult::Feasible { solution, .. } => {
            let terms: Vec<DecompositionTerm> = solution
                .into_iter()
                .zip(basics)
                .filter(|(q, _)| q.is_positive())
                .map(|(q, (array, tree))| DecompositionTerm {
                    weight: q,
                    array,
                    tree,
                })
                .collect();
            let decomposition = Decomposition {
                signature: sig,
                terms,
            };
            assert!(
                decomposition.verifies_against(m),
                "LP solution failed exact reconstruction"
            );
            Ok(LpOutcome::Decomposed(decomposition))
        }
        FeasibilityResult::Infeasible { certificate, .. } => {
            let functional = BoxTensor::from_values(sig, certificate[..entry_count].to_vec())?;
            let witness = InfeasibilityCertificate {
                functional,
                offset: certificate[entry_count].clone(),
            };
            assert!(
                witness.verify(m)?,
                "infeasibility certificate failed re-verification"
            );
            Ok(LpOutcome::Infeasible(witness))
        }
    }
}

// ---------------------------------------------------------------------------
// Randomized protocol
// ---------------------------------------------------------------------------

/// Executable protocol implementing a measurement from a decomposition of
/// its total array: draw a wiring with the decomposition weights, run it,
/// and announce `r` with probability `R_r(a|x) / M(a|x)` at the realized
/// `(a, x)`.
#[derive(Clone, Debug)]
pub struct RandomizedProtocol {
    measurement: Measurement,
    decomposition: Decomposition,
    total: BoxTensor,
}

/// Checks that `d` decomposes `total_array(m)` exactly and packages the
/// executable protocol. At every realizable `(a, x)` the announcement
/// probabilities are then automatically in `[0, 1]` because
/// `R_r(a|x) ≤ M(a|x)`.
pub fn randomized_protocol(m: &Measurement, d: &Decomposition) -> Result<RandomizedProtocol> {
    let total = total_array(m);
    if d.signature != *m.signature() {
        return Err(Error::SignatureMismatch(
            "decomposition vs measurement".into(),
        ));
    }
    if d.terms.iter().any(|t| !t.weight.is_positive()) {
        return Err(Error::Inconsistent(
            "decomposition weights must be strictly positive".into(),
        ));
    }
    if !d.verifies_against(&total) {
        return Err(Error::Inconsistent(
            "the decomposition does not reconstruct the measurement's total array".into(),
        ));
    }
    Ok(RandomizedProtocol {
        measurement: m.clone(),
        decomposition: d.clone(),
        total: total.tensor().clone(),
    })
}

impl RandomizedProtocol {
    pub fn measurement(&self) -> &Measurement {
        &self.measurement
    }

    pub fn decomposition(&self) -> &Decomposition {
        &self.decomposition
    }

    /// Exact outcome distribution of the protocol on a state, evaluated
    /// through the protocol itself:
    /// `Pr(r) = Σ_i w_i Σ_{(a,x) realizable under tree i} P(a|x) · R_r(a|x)/M(a|x)`.
    pub fn outcome_distribution(&self, p: &State) -> Result<Vec<Rational>> {
        self.total.check_same_signature(p.tensor())?;
        let sig = p.signature();
        let mut dist = vec![Rational::zero(); self.measurement.outcome_count()];
        for term in &self.decomposition.terms {
            for (a, x, _) in term.tree.realizable(sig)? {
                let weight = &term.weight * p.tensor().get(&a, &x);
                if weight.is_zero() {
                    continue;
                }
                let m_ax = self.total.get(&a, &x);
                debug_assert!(m_ax.is_positive());
                for (r, effect) in self.measurement.effects().iter().enumerate() {
                    let r_ax = effect.tensor().get(&a, &x);
                    if !r_ax.is_zero() {
                        dist[r] += &weight * r_ax / m_ax;
                    }
                }
            }
        }
        Ok(dist)
    }

    /// Runs one trial: samples a wiring, walks it against the state with
    /// exact conditional sampling, and announces an outcome label.
    pub fn sample<R: Rng + ?Sized>(&self, p: &State, rng: &mut R) -> Result<ProtocolRun> {
        self.total.check_same_signature(p.tensor())?;
        let weights: Vec<Rational> = self
            .decomposition
            .terms
            .iter()
            .map(|t| t.weight.clone())
            .collect();
        let pick = sample_categorical(&weights, rng);
        let tree = &self.decomposition.terms[pick].tree;

        let (a, x) = sample_tree_run(tree, p, rng);

        // Announce r with probability R_r(a|x) / M(a|x); the effect values
        // at (a, x) sum to M(a|x) > 0, so no failure branch exists.
        let announce: Vec<Rational> = self
            .measurement
            .effects()
            .iter()
            .map(|e| e.tensor().get(&a, &x).clone())
            .collect();
        let outcome = sample_categorical(&announce, rng);
        Ok(ProtocolRun {
            term: pick,
            outcomes: a,
            settings: x,
            outcome,
        })
    }
}

/// Record of one protocol trial.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProtocolRun {
    /// Index of the decomposition term whose wiring was executed.
    pub term: usize,
    pub outcomes: Vec<usize>,
    pub settings: Vec<usize>,
    /// Announced measurement outcome.
    pub outcome: usize,
}

/// Walks the wiring against the state, sampling each measured subsystem
/// from its exact conditional distribution given the history.
fn sample_tree_run<R: Rng + ?Sized>(
    tree: &BasicTree,
    p: &State,
    rng: &mut R,
) -> (Vec<usize>, Vec<usize>) {
    let sig = p.signature();
    let n = sig.subsystem_count();
    let mut a = vec![0usize; n];
    let mut x = vec![0usize; n];

    // Unnormalised conditional over the not-yet-measured subsystems.
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut current = p.tensor().clone();
    let mut node = tree;
    loop {
        match node {
            BasicTree::Leaf { .. } => break,
            BasicTree::Node {
                subsystem,
                fiducial,
                children,
            } => {
                let pos = remaining
                    .iter()
                    .position(|&s| s == *subsystem)
                    .expect("validated trees measure each subsystem once");
                let weights = local_outcome_weights(&current, pos, *fiducial);
                let an = sample_categorical(&weights, rng);
                a[*subsystem] = an;
                x[*subsystem] = *fiducial;

                if remaining.len() == 1 {
                    node = &children[an];
                    continue; // next iteration sees the leaf
                }
                current = condition_unnormalized(&current, pos, *fiducial, an);
                remaining.remove(pos);
                node = &children[an];
            }
        }
    }
    (a, x)
}

/// Unnormalised marginal weights of subsystem `pos` measured with
/// `fiducial`, with all other settings pinned to 0 (no-signalling makes the
/// pinning immaterial).
fn local_outcome_weights(tensor: &BoxTensor, pos: usize, fiducial: usize) -> Vec<Rational> {
    let sig = tensor.signature();
    let mut x = vec![0usize; sig.subsystem_count()];
    x[pos] = fiducial;
    let mut weights = vec![Rational::zero(); sig.outcome_count(pos, fiducial)];
    for a in sig.outcomes(&x) {
        weights[a[pos]] += tensor.get(&a, &x);
    }
    weights
}

/// Pins subsystem `pos` to `(outcome | fiducial)` without normalising,
/// returning the tensor over the remaining subsystems.
fn condition_unnormalized(
    tensor: &BoxTensor,
    pos: usize,
    fiducial: usize,
    outcome: usize,
) -> BoxTensor {
    let sig = tensor.signature();
    let n = sig.subsystem_count();
    let rest: Vec<usize> = (0..n).filter(|&i| i != pos).collect();
    let reduced = sig.restrict(&rest).expect("at least two subsystems");
    BoxTensor::from_fn(reduced, |a_hat, x_hat| {
        let mut a = Vec::with_capacity(n);
        let mut x = Vec::with_capacity(n);
        a.extend_from_slice(&a_hat[..pos]);
        a.push(outcome);
        a.extend_from_slice(&a_hat[pos..]);
        x.extend_from_slice(&x_hat[..pos]);
        x.push(fiducial);
        x.extend_from_slice(&x_hat[pos..]);
        tensor.get(&a, &x).clone()
    })
}

// ---------------------------------------------------------------------------
// The tripartite counterexample
// ---------------------------------------------------------------------------

/// A valid 8-outcome measurement on three subsystems (two binary fiducial
/// measurements each) whose total array is *not* a convex combination of
/// basic arrays: every effect is a single unit entry, yet the unit entry at
/// `(001|000)` is surrounded by zeros inside its block, which no 0/1 wiring
/// array can reproduce with positive weights.
pub fn counterexample_tripartite() -> Measurement {
    let sig = SystemSignature::binary(3, 2);
    let support: [([usize; 3], [usize; 3]); 8] = [
        ([0, 0, 1], [0, 0, 0]),
        ([1, 1, 0], [0, 0, 0]),
        ([0, 0, 0], [1, 0, 0]),
        ([1, 0, 0], [1, 0, 0]),
        ([1, 0, 1], [0, 1, 0]),
        ([1, 1, 1], [0, 1, 0]),
        ([0, 1, 0], [0, 0, 1]),
        ([0, 1, 1], [0, 0, 1]),
    ];
    let effects: Vec<Effect> = support
        .iter()
        .map(|(a, x)| {
            Effect::unit_entry(&sig, a, x, Rational::one()).expect("unit entries are effects")
        })
        .collect();
    Measurement::new(effects).expect("eight effects over one signature")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurements::validate_measurement;
    use crate::rational::{integer, ratio};
    use crate::states::{deterministic_vertices, maximally_mixed, nosig_vertices};

    fn adaptive_pair_tree() -> BasicTree {
        // Measure subsystem 0 with fiducial 0, feed the outcome into the
        // fiducial choice on subsystem 1, announce the second outcome.
        BasicTree::node(
            0,
            0,
            vec![
                BasicTree::node(1, 0, vec![BasicTree::leaf(0), BasicTree::leaf(1)]),
                BasicTree::node(1, 1, vec![BasicTree::leaf(0), BasicTree::leaf(1)]),
            ],
        )
    }

    #[test]
    fn adaptive_pair_array_matches_hand_computation() {
        let sig = SystemSignature::binary(2, 2);
        let array = tree_total_array(&adaptive_pair_tree(), &sig).unwrap();
        // Nonzero exactly at x=(0, a_1): (00|00), (01|00), (10|01), (11|01).
        for (a, x, v) in array.tensor().iter() {
            let expected = x[0] == 0 && x[1] == a[0];
            assert_eq!(v.is_one(), expected, "at (a={a:?}|x={x:?})");
            assert!(v.is_one() || v.is_zero());
        }
        assert!(array.is_valid());
    }

    #[test]
    fn adaptive_pair_effects_partition_the_array() {
        let sig = SystemSignature::binary(2, 2);
        let m = tree_effects(&adaptive_pair_tree(), &sig).unwrap();
        assert_eq!(m.outcome_count(), 2);
        // r = a_2: effect 0 hits (00|00) and (10|01).
        assert!(m.effects()[0].tensor().get(&[0, 0], &[0, 0]).is_one());
        assert!(m.effects()[0].tensor().get(&[1, 0], &[0, 1]).is_one());
        assert!(m.effects()[1].tensor().get(&[0, 1], &[0, 0]).is_one());
        assert!(m.effects()[1].tensor().get(&[1, 1], &[0, 1]).is_one());
        assert!(validate_measurement(&m).is_valid());

        let total = total_array(&m);
        let array = tree_total_array(&adaptive_pair_tree(), &sig).unwrap();
        assert_eq!(total.tensor(), array.tensor());
    }

    #[test]
    fn single_system_tree_is_a_setting_indicator() {
        let sig = SystemSignature::new(vec![vec![2, 3]]).unwrap();
        let tree = BasicTree::node(0, 1, vec![BasicTree::leaf(0); 3]);
        let array = tree_total_array(&tree, &sig).unwrap();
        for (_, x, v) in array.tensor().iter() {
            assert_eq!(v.is_one(), x == [1]);
        }
    }

    #[test]
    fn constant_outcome_function_gives_single_effect() {
        let sig = SystemSignature::binary(2, 2);
        let tree = adaptive_pair_tree()
            .with_outcome_fn(&sig, &mut |_| 0)
            .unwrap();
        let m = tree_effects(&tree, &sig).unwrap();
        assert_eq!(m.outcome_count(), 1);
        let array = tree_total_array(&tree, &sig).unwrap();
        assert_eq!(m.effects()[0].tensor(), array.tensor());
    }

    #[test]
    fn malformed_trees_are_rejected() {
        let sig = SystemSignature::binary(2, 2);
        // Leaf before measuring subsystem 1.
        let short = BasicTree::node(0, 0, vec![BasicTree::leaf(0), BasicTree::leaf(0)]);
        assert!(short.validate(&sig).is_err());
        // Subsystem measured twice.
        let twice = BasicTree::node(
            0,
            0,
            vec![
                BasicTree::node(0, 1, vec![BasicTree::leaf(0), BasicTree::leaf(0)]),
                BasicTree::leaf(0),
            ],
        );
        assert!(twice.validate(&sig).is_err());
        // Wrong child count.
        let narrow = BasicTree::node(0, 0, vec![BasicTree::leaf(0)]);
        assert!(narrow.validate(&sig).is_err());
    }

    #[test]
    fn single_system_enumeration_yields_one_array_per_fiducial() {
        let sig = SystemSignature::new(vec![vec![2, 2]]).unwrap();
        let arrays = enumerate_basic_arrays(&sig).unwrap();
        assert_eq!(arrays.len(), 2);
        for b in &arrays {
            assert!(b.is_valid());
        }
    }

    #[test]
    fn bipartite_enumeration_dedups_sixteen_trees_to_twelve_arrays() {
        let sig = SystemSignature::binary(2, 2);
        let trees = enumerate_basic_trees(&sig).unwrap();
        assert_eq!(trees.len(), 16);
        let arrays = enumerate_basic_arrays(&sig).unwrap();
        assert_eq!(arrays.len(), 12);
        // Every array is a valid one-effect measurement.
        let vertices = nosig_vertices(&sig).unwrap();
        for b in &arrays {
            assert!(b.is_valid());
            for v in &vertices.vertices {
                assert_eq!(b.tensor().dot(v.tensor()).unwrap(), integer(1));
            }
        }
    }

    #[test]
    fn greedy_returns_basic_arrays_as_single_terms() {
        let sig = SystemSignature::binary(2, 2);
        let array = tree_total_array(&adaptive_pair_tree(), &sig).unwrap();
        let d = greedy_decompose(&array).unwrap();
        assert_eq!(d.terms.len(), 1);
        assert_eq!(d.terms[0].weight, integer(1));
        assert_eq!(d.terms[0].array.tensor(), array.tensor());
    }

    #[test]
    fn greedy_recovers_a_two_term_mixture() {
        let sig = SystemSignature::binary(2, 2);
        let adaptive = tree_total_array(&adaptive_pair_tree(), &sig).unwrap();
        let fixed_tree = BasicTree::node(
            0,
            0,
            vec![
                BasicTree::node(1, 0, vec![BasicTree::leaf(0), BasicTree::leaf(0)]),
                BasicTree::node(1, 0, vec![BasicTree::leaf(0), BasicTree::leaf(0)]),
            ],
        );
        let fixed = tree_total_array(&fixed_tree, &sig).unwrap();
        let half = ratio(1, 2);
        let mixed_tensor = adaptive
            .tensor()
            .scale(&half)
            .add(&fixed.tensor().scale(&half))
            .unwrap();
        let mixed = TotalArray::new(mixed_tensor, integer(1)).unwrap();
        let d = greedy_decompose(&mixed).unwrap();
        assert!(d.verifies_against(&mixed));
        assert_eq!(d.total_weight(), integer(1));
        assert!(d.terms.len() >= 2);
    }

    #[test]
    fn greedy_blocks_on_diagonal_zero_pattern() {
        // A zero on the diagonal of every block: no basic array fits.
        let sig = SystemSignature::binary(2, 2);
        let tensor = BoxTensor::from_fn(sig, |a, _| {
            if a[0] == a[1] {
                Rational::zero()
            } else {
                ratio(1, 4)
            }
        });
        let array = TotalArray::new(tensor, integer(1)).unwrap();
        assert!(matches!(greedy_decompose(&array), Err(Error::Blocked(_))));
    }

    #[test]
    fn greedy_rejects_three_subsystems_with_directed_error() {
        let m = counterexample_tripartite();
        let err = greedy_decompose(&total_array(&m)).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::GreedyUnsupported { subsystems: 3 }));
        assert!(msg.contains("lp_decompose"));
    }

    #[test]
    fn lp_accepts_what_greedy_builds() {
        let sig = SystemSignature::binary(2, 2);
        let array = tree_total_array(&adaptive_pair_tree(), &sig).unwrap();
        match lp_decompose(&array).unwrap() {
            LpOutcome::Decomposed(d) => {
                assert!(d.verifies_against(&array));
                assert_eq!(d.terms.len(), 1);
                assert_eq!(d.terms[0].weight, integer(1));
            }
            LpOutcome::Infeasible(_) => panic!("basic arrays must decompose"),
        }
    }

    #[test]
    fn counterexample_is_valid_but_not_decomposable() {
        let m = counterexample_tripartite();
        assert!(validate_measurement(&m).is_valid());

        let total = total_array(&m);
        // The printed support and the neighbourhood of (001|000).
        let t = total.tensor();
        assert!(t.get(&[0, 0, 1], &[0, 0, 0]).is_one());
        assert!(t.get(&[1, 0, 1], &[0, 0, 0]).is_zero());
        assert!(t.get(&[0, 1, 1], &[0, 0, 0]).is_zero());
        assert!(t.get(&[0, 0, 0], &[0, 0, 0]).is_zero());
        let ones: usize = t.entries().iter().filter(|v| v.is_one()).count();
        let zeros: usize = t.entries().iter().filter(|v| v.is_zero()).count();
        assert_eq!((ones, zeros), (8, 56));

        match lp_decompose(&total).unwrap() {
            LpOutcome::Infeasible(cert) => {
                assert!(cert.verify(&total).unwrap());
            }
            LpOutcome::Decomposed(_) => panic!("the counterexample must be infeasible"),
        }
    }

    #[test]
    fn effect_zero_dot_mixed_is_one_eighth() {
        let m = counterexample_tripartite();
        let mm = maximally_mixed(m.signature());
        assert_eq!(
            m.effects()[0].tensor().dot(mm.tensor()).unwrap(),
            ratio(1, 8)
        );
    }

    #[test]
    fn protocol_announces_deterministically_for_the_adaptive_pair() {
        let sig = SystemSignature::binary(2, 2);
        let m = tree_effects(&adaptive_pair_tree(), &sig).unwrap();
        let d = greedy_decompose(&total_array(&m)).unwrap();
        let protocol = randomized_protocol(&m, &d).unwrap();

        // On the deterministic state a_1 = 0 at x_1 = 0 and a_2 = 1 at
        // x_2 = 0, the wiring realizes x = (0,0), a = (0,1) and announces 1.
        let det = deterministic_vertices(&sig);
        let target = det
            .vertices
            .iter()
            .find(|v| v.tensor().get(&[0, 1], &[0, 0]).is_one())
            .unwrap();
        let dist = protocol.outcome_distribution(target).unwrap();
        assert_eq!(dist, vec![integer(0), integer(1)]);

        let mut rng = <rand::rngs::StdRng as rand::SeedableRng>::seed_from_u64(42);
        let run = protocol.sample(target, &mut rng).unwrap();
        assert_eq!(run.outcome, 1);
        assert_eq!(run.settings, vec![0, 0]);
    }

    #[test]
    fn tree_arrays_have_lines_of_ones_along_the_last_subsystem() {
        // The array of a wiring is insensitive to the outcome of the last
        // subsystem measured on each branch: all sibling outcomes share the
        // entry value 1.
        use crate::random::random_basic_tree;
        use rand::rngs::StdRng;
        use rand::SeedableRng;

        fn check_lines(
            tree: &BasicTree,
            sig: &SystemSignature,
            array: &TotalArray,
            a: &mut Vec<usize>,
            x: &mut Vec<usize>,
            depth: usize,
        ) {
            if let BasicTree::Node {
                subsystem,
                fiducial,
                children,
            } = tree
            {
                x[*subsystem] = *fiducial;
                let last = depth + 1 == sig.subsystem_count();
                for (an, child) in children.iter().enumerate() {
                    a[*subsystem] = an;
                    if last {
                        assert!(
                            array.tensor().get(a, x).is_one(),
                            "line of 1s broken at (a={a:?}|x={x:?})"
                        );
                    }
                    check_lines(child, sig, array, a, x, depth + 1);
                }
            }
        }

        let mut rng = StdRng::seed_from_u64(53);
        let sig = SystemSignature::new(vec![vec![2, 3], vec![2, 2], vec![2, 2]]).unwrap();
        for _ in 0..10 {
            let tree = random_basic_tree(&sig, 1, &mut rng);
            let array = tree_total_array(&tree, &sig).unwrap();
            let mut a = vec![0; 3];
            let mut x = vec![0; 3];
            check_lines(&tree, &sig, &array, &mut a, &mut x, 0);
        }
    }

    #[test]
    fn protocol_distribution_equals_direct_outcome_distribution() {
        // Protocol-formula evaluation against the direct dot products, on
        // random valid measurements and random valid states.
        use crate::measurements::outcome_distribution;
        use crate::random::{random_local_state, random_measurement};
        use rand::rngs::StdRng;
        use rand::SeedableRng;

        let sig = SystemSignature::binary(2, 2);
        let mut rng = StdRng::seed_from_u64(59);
        for case in 0..20 {
            let m = random_measurement(&sig, 1 + case % 4, 4, &mut rng).unwrap();
            let d = greedy_decompose(&total_array(&m)).unwrap();
            let protocol = randomized_protocol(&m, &d).unwrap();
            for _ in 0..3 {
                let p = random_local_state(&sig, &mut rng).unwrap();
                let via_protocol = protocol.outcome_distribution(&p).unwrap();
                let direct = outcome_distribution(&m, &p).unwrap();
                assert_eq!(via_protocol, direct, "case {case}");
            }
        }
    }

    #[test]
    fn half_split_of_a_basic_array_is_a_coin_flip() {
        let sig = SystemSignature::binary(2, 2);
        let array = tree_total_array(&adaptive_pair_tree(), &sig).unwrap();
        let half = array.tensor().scale(&ratio(1, 2));
        let m = Measurement::new(vec![
            Effect::new(half.clone()).unwrap(),
            Effect::new(half).unwrap(),
        ])
        .unwrap();
        let d = greedy_decompose(&total_array(&m)).unwrap();
        let protocol = randomized_protocol(&m, &d).unwrap();
        let p = maximally_mixed(&sig);
        assert_eq!(
            protocol.outcome_distribution(&p).unwrap(),
            vec![ratio(1, 2), ratio(1, 2)]
        );
    }

    #[test]
    fn greedy_and_lp_agree_that_the_diagonal_pattern_is_invalid() {
        let sig = SystemSignature::binary(2, 2);
        let tensor = BoxTensor::from_fn(sig, |a, _| {
            if a[0] == a[1] {
                Rational::zero()
            } else {
                ratio(1, 4)
            }
        });
        let array = TotalArray::new(tensor, integer(1)).unwrap();
        assert!(matches!(greedy_decompose(&array), Err(Error::Blocked(_))));
        match lp_decompose(&array).unwrap() {
            LpOutcome::Infeasible(cert) => assert!(cert.verify(&array).unwrap()),
            LpOutcome::Decomposed(_) => panic!("LP must agree with greedy"),
        }
    }

    #[test]
    fn protocol_rejects_mismatched_decomposition() {
        let sig = SystemSignature::binary(2, 2);
        let m = tree_effects(&adaptive_pair_tree(), &sig).unwrap();
        let other_tree = BasicTree::node(
            1,
            1,
            vec![
                BasicTree::node(0, 0, vec![BasicTree::leaf(0), BasicTree::leaf(0)]),
                BasicTree::node(0, 0, vec![BasicTree::leaf(0), BasicTree::leaf(0)]),
            ],
        );
        let other = tree_total_array(&other_tree, &sig).unwrap();
        let d = greedy_decompose(&other).unwrap();
        assert!(matches!(
            randomized_protocol(&m, &d),
            Err(Error::Inconsistent(_))
        ));
    }
}
