//! Dense exact-rational tensors over the joint `(a, x)` index set.
//!
//! A `BoxTensor` holds one rational per valid pair of a joint outcome vector
//! `a` and a joint setting vector `x`. States, effects and total measurement
//! arrays are all tensors of this kind; they differ only in the constraints
//! imposed on their entries. Tensors are immutable after construction and all
//! operations are pure, so values can be shared and sent between threads
//! freely.

use std::collections::BTreeMap;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::rational::Rational;
use crate::signature::SystemSignature;

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct BoxTensor {
    signature: SystemSignature,
    /// Entries in canonical order: setting blocks in setting order, outcomes
    /// lexicographic within each block.
    entries: Vec<Rational>,
    block_offsets: Vec<usize>,
}

impl BoxTensor {
    /// Builds a tensor from entries listed in canonical order.
    pub fn from_values(signature: SystemSignature, entries: Vec<Rational>) -> Result<Self> {
        let expected = signature.entry_count();
        if entries.len() != expected {
            return Err(Error::Shape(format!(
                "expected {expected} entries for signature {:?}, got {}",
                signature.subsystems(),
                entries.len()
            )));
        }
        let block_offsets = signature.block_offsets();
        Ok(Self {
            signature,
            entries,
            block_offsets,
        })
    }

    /// Builds a tensor by evaluating `f(a, x)` over the whole index set.
    pub fn from_fn(
        signature: SystemSignature,
        mut f: impl FnMut(&[usize], &[usize]) -> Rational,
    ) -> Self {
        let mut entries = Vec::with_capacity(signature.entry_count());
        for x in signature.settings() {
            for a in signature.outcomes(&x) {
                entries.push(f(&a, &x));
            }
        }
        Self::from_values(signature, entries).expect("from_fn covers the index set")
    }

    /// Builds a tensor from an explicit `(a, x) -> value` map. The map must
    /// cover the valid index set exactly; missing, surplus or out-of-range
    /// keys are shape errors.
    pub fn from_entry_map(
        signature: SystemSignature,
        map: &BTreeMap<(Vec<usize>, Vec<usize>), Rational>,
    ) -> Result<Self> {
        for (a, x) in map.keys() {
            if !signature.is_valid_pair(a, x) {
                return Err(Error::Shape(format!(
                    "entry index (a={a:?}, x={x:?}) is not valid for the signature"
                )));
            }
        }
        if map.len() != signature.entry_count() {
            return Err(Error::Shape(format!(
                "entry map covers {} of {} index pairs",
                map.len(),
                signature.entry_count()
            )));
        }
        let mut entries = Vec::with_capacity(signature.entry_count());
        for x in signature.settings() {
            for a in signature.outcomes(&x) {
                // Totality was already established by the two checks above.
                entries.push(map[&(a, x.clone())].clone());
            }
        }
        Self::from_values(signature, entries)
    }

    /// The all-zero tensor.
    pub fn zeros(signature: SystemSignature) -> Self {
        Self::from_fn(signature, |_, _| Rational::zero())
    }

    pub fn signature(&self) -> &SystemSignature {
        &self.signature
    }

    /// Entries in canonical order.
    pub fn entries(&self) -> &[Rational] {
        &self.entries
    }

    fn flat_index(&self, a: &[usize], x: &[usize]) -> usize {
        assert!(
            self.signature.is_valid_pair(a, x),
            "index (a={a:?}, x={x:?}) invalid for signature {:?}",
            self.signature.subsystems()
        );
        self.block_offsets[self.signature.setting_rank(x)] + self.signature.outcome_rank(a, x)
    }

    pub fn get(&self, a: &[usize], x: &[usize]) -> &Rational {
        &self.entries[self.flat_index(a, x)]
    }

    /// Iterates `(a, x, value)` in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<usize>, Vec<usize>, &Rational)> + '_ {
        self.signature
            .entries()
            .zip(&self.entries)
            .map(|((a, x), v)| (a, x, v))
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(Rational::is_zero)
    }

    /// Full contraction `Σ_{a,x} r(a|x)·p(a|x)`; bilinear and symmetric.
    pub fn dot(&self, other: &BoxTensor) -> Result<Rational> {
        self.check_same_signature(other)?;
        let mut acc = Rational::zero();
        for (l, r) in self.entries.iter().zip(&other.entries) {
            if !l.is_zero() && !r.is_zero() {
                acc += l * r;
            }
        }
        Ok(acc)
    }

    /// Composite tensor with concatenated signature and multiplied entries.
    pub fn tensor_product(&self, other: &BoxTensor) -> BoxTensor {
        let signature = self.signature.concat(&other.signature);
        let n = self.signature.subsystem_count();
        BoxTensor::from_fn(signature, |a, x| {
            self.get(&a[..n], &x[..n]) * other.get(&a[n..], &x[n..])
        })
    }

    /// Sums out `subsystem` with its fiducial choice fixed to `setting`,
    /// producing a tensor over the remaining subsystems:
    /// `q(â|x̂) = Σ_{a_n} p(a_n â | setting x̂)`.
    pub fn marginal(&self, subsystem: usize, setting: usize) -> Result<BoxTensor> {
        let n = self.signature.subsystem_count();
        if subsystem >= n {
            return Err(Error::Shape(format!(
                "subsystem index {subsystem} out of range for {n} subsystems"
            )));
        }
        if n < 2 {
            return Err(Error::Shape(
                "marginal needs at least two subsystems".into(),
            ));
        }
        if setting >= self.signature.fiducial_count(subsystem) {
            return Err(Error::Shape(format!(
                "fiducial {setting} out of range on subsystem {subsystem}"
            )));
        }
        let rest: Vec<usize> = (0..n).filter(|&i| i != subsystem).collect();
        let reduced = self.signature.restrict(&rest)?;
        let outcomes_here = self.signature.outcome_count(subsystem, setting);
        Ok(BoxTensor::from_fn(reduced, |a_hat, x_hat| {
            let mut a = insert_at(a_hat, subsystem, 0);
            let x = insert_at(x_hat, subsystem, setting);
            let mut acc = Rational::zero();
            for an in 0..outcomes_here {
                a[subsystem] = an;
                acc += self.get(&a, &x);
            }
            acc
        }))
    }

    /// Applies a local relabelling of fiducial choices and outcomes.
    pub fn relabel(&self, relabelling: &Relabelling) -> Result<BoxTensor> {
        relabelling.validate(&self.signature)?;
        let inverse = relabelling.inverse();
        Ok(BoxTensor::from_fn(
            self.signature.clone(),
            |a_new, x_new| {
                let (a_old, x_old) = inverse.apply_indices(a_new, x_new);
                self.get(&a_old, &x_old).clone()
            },
        ))
    }

    pub fn scale(&self, k: &Rational) -> BoxTensor {
        BoxTensor {
            signature: self.signature.clone(),
            entries: self.entries.iter().map(|e| e * k).collect(),
            block_offsets: self.block_offsets.clone(),
        }
    }

    pub fn add(&self, other: &BoxTensor) -> Result<BoxTensor> {
        self.check_same_signature(other)?;
        Ok(BoxTensor {
            signature: self.signature.clone(),
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(l, r)| l + r)
                .collect(),
            block_offsets: self.block_offsets.clone(),
        })
    }

    pub fn sub(&self, other: &BoxTensor) -> Result<BoxTensor> {
        self.check_same_signature(other)?;
        Ok(BoxTensor {
            signature: self.signature.clone(),
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(l, r)| l - r)
                .collect(),
            block_offsets: self.block_offsets.clone(),
        })
    }

    /// Exact linear combination `Σ w_i t_i`.
    pub fn linear_combination(terms: &[(Rational, &BoxTensor)]) -> Result<BoxTensor> {
        let (_, first) = terms
            .first()
            .ok_or_else(|| Error::Shape("linear combination of no tensors".into()))?;
        let mut acc = BoxTensor::zeros(first.signature.clone());
        for (w, t) in terms {
            acc = acc.add(&t.scale(w))?;
        }
        Ok(acc)
    }

    pub fn check_same_signature(&self, other: &BoxTensor) -> Result<()> {
        if self.signature != other.signature {
            return Err(Error::SignatureMismatch(format!(
                "{:?} vs {:?}",
                self.signature.subsystems(),
                other.signature.subsystems()
            )));
        }
        Ok(())
    }
}

fn insert_at(values: &[usize], position: usize, value: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(values.len() + 1);
    out.extend_from_slice(&values[..position]);
    out.push(value);
    out.extend_from_slice(&values[position..]);
    out
}

/// Local relabelling: per subsystem a permutation of fiducial measurements
/// and, for each (old) fiducial, a permutation of its outcomes. A fiducial
/// may only be renamed to a fiducial with the same outcome count, so
/// relabelling never changes the signature.
#[derive(Clone, Debug)]
pub struct Relabelling {
    pub subsystems: Vec<SubsystemRelabelling>,
}

#[derive(Clone, Debug)]
pub struct SubsystemRelabelling {
    /// `fiducial_perm[old] = new`.
    pub fiducial_perm: Vec<usize>,
    /// `outcome_perms[old_fiducial][old_outcome] = new_outcome`.
    pub outcome_perms: Vec<Vec<usize>>,
}

impl Relabelling {
    pub fn identity(signature: &SystemSignature) -> Self {
        let subsystems = signature
            .subsystems()
            .iter()
            .map(|fids| SubsystemRelabelling {
                fiducial_perm: (0..fids.len()).collect(),
                outcome_perms: fids.iter().map(|&k| (0..k).collect()).collect(),
            })
            .collect();
        Self { subsystems }
    }

    pub fn validate(&self, signature: &SystemSignature) -> Result<()> {
        if self.subsystems.len() != signature.subsystem_count() {
            return Err(Error::Shape(format!(
                "relabelling covers {} subsystems, signature has {}",
                self.subsystems.len(),
                signature.subsystem_count()
            )));
        }
        for (i, sub) in self.subsystems.iter().enumerate() {
            let m = signature.fiducial_count(i);
            if !is_permutation(&sub.fiducial_perm, m) {
                return Err(Error::Shape(format!(
                    "subsystem {i}: fiducial permutation {:?} is not a permutation of 0..{m}",
                    sub.fiducial_perm
                )));
            }
            if sub.outcome_perms.len() != m {
                return Err(Error::Shape(format!(
                    "subsystem {i}: expected {m} outcome permutations"
                )));
            }
            for (j, perm) in sub.outcome_perms.iter().enumerate() {
                let k = signature.outcome_count(i, j);
                if !is_permutation(perm, k) {
                    return Err(Error::Shape(format!(
                        "subsystem {i}, fiducial {j}: {perm:?} is not a permutation of 0..{k}"
                    )));
                }
                // Renaming j -> fiducial_perm[j] must not change outcome counts.
                if signature.outcome_count(i, sub.fiducial_perm[j]) != k {
                    return Err(Error::Shape(format!(
                        "subsystem {i}: fiducial {j} and {} have different outcome counts",
                        sub.fiducial_perm[j]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn inverse(&self) -> Relabelling {
        let subsystems = self
            .subsystems
            .iter()
            .map(|sub| {
                let fiducial_perm = invert_permutation(&sub.fiducial_perm);
                // outcome_perms are indexed by old fiducial; the inverse maps
                // the NEW fiducial label back, so reindex through the
                // fiducial permutation.
                let mut outcome_perms = vec![Vec::new(); sub.outcome_perms.len()];
                for (old_fid, perm) in sub.outcome_perms.iter().enumerate() {
                    outcome_perms[sub.fiducial_perm[old_fid]] = invert_permutation(perm);
                }
                SubsystemRelabelling {
                    fiducial_perm,
                    outcome_perms,
                }
            })
            .collect();
        Relabelling { subsystems }
    }

    /// Maps `(a, x)` through the relabelling.
    pub fn apply_indices(&self, a: &[usize], x: &[usize]) -> (Vec<usize>, Vec<usize>) {
        let mut a_new = Vec::with_capacity(a.len());
        let mut x_new = Vec::with_capacity(x.len());
        for i in 0..x.len() {
            let sub = &self.subsystems[i];
            x_new.push(sub.fiducial_perm[x[i]]);
            a_new.push(sub.outcome_perms[x[i]][a[i]]);
        }
        (a_new, x_new)
    }
}

fn is_permutation(perm: &[usize], n: usize) -> bool {
    if perm.len() != n {
        return false;
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || seen[p] {
            return false;
        }
        seen[p] = true;
    }
    true
}

fn invert_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}
