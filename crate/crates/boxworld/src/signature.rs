//! System signatures and the joint index algebra.
//!
//! A signature records, for every subsystem, the list of its fiducial
//! measurements by outcome count. Outcome counts may differ between fiducial
//! measurements of the same subsystem, so the joint index set
//! `{(a, x) : x a joint setting, a a joint outcome valid under x}` is ragged.
//!
//! Canonical entry order, shared by the in-memory layout and the JSON file
//! format: joint settings `x` in lexicographic order with subsystem 0
//! slowest, and within each setting block the joint outcomes `a` in
//! lexicographic order, again with subsystem 0 slowest.

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct SystemSignature {
    subsystems: Vec<Vec<usize>>,
}

impl SystemSignature {
    /// `subsystems[i][j]` is the outcome count of fiducial measurement `j`
    /// on subsystem `i`. Every subsystem needs at least one fiducial
    /// measurement and every outcome count must be at least 1.
    pub fn new(subsystems: Vec<Vec<usize>>) -> Result<Self> {
        if subsystems.is_empty() {
            return Err(Error::Shape(
                "signature needs at least one subsystem".into(),
            ));
        }
        for (i, fids) in subsystems.iter().enumerate() {
            if fids.is_empty() {
                return Err(Error::Shape(format!(
                    "subsystem {i} has no fiducial measurements"
                )));
            }
            if fids.iter().any(|&k| k == 0) {
                return Err(Error::Shape(format!(
                    "subsystem {i} has a fiducial measurement with zero outcomes"
                )));
            }
        }
        Ok(Self { subsystems })
    }

    /// All subsystems binary: `n` subsystems, each with `fiducials` two-outcome
    /// fiducial measurements.
    pub fn binary(n: usize, fiducials: usize) -> Self {
        Self::new(vec![vec![2; fiducials]; n]).expect("binary signature is well-formed")
    }

    pub fn subsystem_count(&self) -> usize {
        self.subsystems.len()
    }

    pub fn subsystems(&self) -> &[Vec<usize>] {
        &self.subsystems
    }

    pub fn fiducial_count(&self, subsystem: usize) -> usize {
        self.subsystems[subsystem].len()
    }

    pub fn outcome_count(&self, subsystem: usize, fiducial: usize) -> usize {
        self.subsystems[subsystem][fiducial]
    }

    /// Number of joint settings, `Π_i m_i`.
    pub fn setting_count(&self) -> usize {
        self.subsystems.iter().map(Vec::len).product()
    }

    /// Number of valid `(a, x)` pairs. Summing the block sizes over all
    /// settings telescopes to `Π_i (Σ_j k_{ij})`.
    pub fn entry_count(&self) -> usize {
        self.subsystems
            .iter()
            .map(|fids| fids.iter().sum::<usize>())
            .product()
    }

    /// Number of outcome vectors valid under the joint setting `x`.
    pub fn block_size(&self, x: &[usize]) -> usize {
        debug_assert_eq!(x.len(), self.subsystem_count());
        x.iter()
            .enumerate()
            .map(|(i, &xi)| self.subsystems[i][xi])
            .product()
    }

    pub fn is_valid_setting(&self, x: &[usize]) -> bool {
        x.len() == self.subsystem_count()
            && x.iter()
                .enumerate()
                .all(|(i, &xi)| xi < self.subsystems[i].len())
    }

    pub fn is_valid_pair(&self, a: &[usize], x: &[usize]) -> bool {
        self.is_valid_setting(x)
            && a.len() == self.subsystem_count()
            && a.iter()
                .zip(x)
                .enumerate()
                .all(|(i, (&ai, &xi))| ai < self.subsystems[i][xi])
    }

    /// Rank of `x` in the canonical setting order.
    pub fn setting_rank(&self, x: &[usize]) -> usize {
        let mut rank = 0;
        for (i, &xi) in x.iter().enumerate() {
            rank = rank * self.subsystems[i].len() + xi;
        }
        rank
    }

    /// Rank of `a` inside the block of setting `x`.
    pub fn outcome_rank(&self, a: &[usize], x: &[usize]) -> usize {
        let mut rank = 0;
        for i in 0..a.len() {
            rank = rank * self.subsystems[i][x[i]] + a[i];
        }
        rank
    }

    /// Flat entry offsets of each setting block, in canonical setting order,
    /// with the total entry count appended.
    pub fn block_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.setting_count() + 1);
        let mut acc = 0;
        offsets.push(0);
        for x in self.settings() {
            acc += self.block_size(&x);
            offsets.push(acc);
        }
        offsets
    }

    /// Joint settings in canonical order.
    pub fn settings(&self) -> MixedRadixIter {
        MixedRadixIter::new(self.subsystems.iter().map(Vec::len).collect())
    }

    /// Joint outcomes valid under `x`, in canonical order.
    pub fn outcomes(&self, x: &[usize]) -> MixedRadixIter {
        debug_assert!(self.is_valid_setting(x));
        MixedRadixIter::new(
            x.iter()
                .enumerate()
                .map(|(i, &xi)| self.subsystems[i][xi])
                .collect(),
        )
    }

    /// All `(a, x)` pairs in canonical entry order.
    pub fn entries(&self) -> impl Iterator<Item = (Vec<usize>, Vec<usize>)> + '_ {
        self.settings()
            .flat_map(move |x| self.outcomes(&x).map(move |a| (a, x.clone())))
    }

    /// Signature of the composite system `self ⊎ other`.
    pub fn concat(&self, other: &SystemSignature) -> SystemSignature {
        let mut subsystems = self.subsystems.clone();
        subsystems.extend(other.subsystems.iter().cloned());
        SystemSignature { subsystems }
    }

    /// Signature of the listed subsystems, in the order given.
    pub fn restrict(&self, subsystems: &[usize]) -> Result<SystemSignature> {
        let picked: Result<Vec<Vec<usize>>> = subsystems
            .iter()
            .map(|&i| {
                self.subsystems
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::Shape(format!("subsystem index {i} out of range")))
            })
            .collect();
        SystemSignature::new(picked?)
    }
}

/// Lexicographic iterator over mixed-radix digit vectors, most significant
/// digit first. Yields nothing once exhausted; an empty radix list yields the
/// single empty vector.
pub struct MixedRadixIter {
    radices: Vec<usize>,
    next: Option<Vec<usize>>,
}

impl MixedRadixIter {
    pub fn new(radices: Vec<usize>) -> Self {
        let next = if radices.iter().any(|&r| r == 0) {
            None
        } else {
            Some(vec![0; radices.len()])
        };
        Self { radices, next }
    }
}

impl Iterator for MixedRadixIter {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut pos = self.radices.len();
        loop {
            if pos == 0 {
                self.next = None;
                break;
            }
            pos -= 1;
            succ[pos] += 1;
            if succ[pos] < self.radices[pos] {
                self.next = Some(succ);
                break;
            }
            succ[pos] = 0;
        }
        Some(current)
    }
}

/// Merges values for a subsystem subset with values for its complement into
/// a full per-subsystem vector. `subset` must be sorted and disjoint from
/// `complement`, which together cover `0..n`.
pub fn merge_by_subsystem(
    n: usize,
    subset: &[usize],
    subset_vals: &[usize],
    complement: &[usize],
    complement_vals: &[usize],
) -> Vec<usize> {
    let mut out = vec![usize::MAX; n];
    for (&i, &v) in subset.iter().zip(subset_vals) {
        out[i] = v;
    }
    for (&i, &v) in complement.iter().zip(complement_vals) {
        out[i] = v;
    }
    debug_assert!(out.iter().all(|&v| v != usize::MAX));
    out
}
