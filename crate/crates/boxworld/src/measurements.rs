//! Effects, measurements and their validation, plus the post-selection
//! simulator.
//!
//! Effects are kept in positive representation: every entry lies in `[0, 1]`.
//! A list of effects is a valid measurement exactly when its total array `M`
//! (the entrywise sum) satisfies `M · P = 1` for every valid state `P`.
//! Since the state polytope contains the maximally mixed state in its
//! relative interior, its affine hull is the full solution set of the
//! normalisation + no-signalling equalities, so validity reduces to two
//! exact checks: `M` hits 1 on the maximally mixed state, and `M` is
//! orthogonal to a kernel basis of the equality system (the *affine
//! certificate*). Cross-checking the certificate verdict against dot
//! products with every no-signalling vertex is done in tests at desk scale.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exact::kernel_basis;
use crate::rational::{in_unit_interval, Rational};
use crate::signature::SystemSignature;
use crate::states::{maximally_mixed, state_equality_system, State};
use crate::tensor::BoxTensor;

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

/// One measurement outcome in positive representation (entries in `[0, 1]`).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Effect {
    tensor: BoxTensor,
}

impl Effect {
    pub fn new(tensor: BoxTensor) -> Result<Self> {
        for (a, x, v) in tensor.iter() {
            if !in_unit_interval(v) {
                return Err(Error::InvalidEffect(format!(
                    "entry {v} at (a={a:?}|x={x:?}) outside [0, 1]"
                )));
            }
        }
        Ok(Self { tensor })
    }

    /// The effect with a single entry `value` at `(a, x)` and zeros
    /// elsewhere; always a product effect.
    pub fn unit_entry(
        sig: &SystemSignature,
        a: &[usize],
        x: &[usize],
        value: Rational,
    ) -> Result<Self> {
        if !sig.is_valid_pair(a, x) {
            return Err(Error::Shape(format!("invalid index (a={a:?}|x={x:?})")));
        }
        Self::new(BoxTensor::from_fn(sig.clone(), |ai, xi| {
            if ai == a && xi == x {
                value.clone()
            } else {
                Rational::zero()
            }
        }))
    }

    /// The functional with entry 1 at every outcome under the fixed joint
    /// setting `x`. Its dot with any valid state is 1, so as a single-effect
    /// measurement it is the trivial "always succeed" measurement.
    pub fn setting_indicator(sig: &SystemSignature, x: &[usize]) -> Result<Self> {
        if !sig.is_valid_setting(x) {
            return Err(Error::Shape(format!("invalid setting {x:?}")));
        }
        Self::new(BoxTensor::from_fn(sig.clone(), |_, xi| {
            if xi == x {
                Rational::one()
            } else {
                Rational::zero()
            }
        }))
    }

    pub fn tensor(&self) -> &BoxTensor {
        &self.tensor
    }

    pub fn signature(&self) -> &SystemSignature {
        self.tensor.signature()
    }
}

/// An outcome-labelled list of effects. Entrywise identical effects under
/// different labels are kept distinct; labels are not merged.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Measurement {
    effects: Vec<Effect>,
}

impl Measurement {
    pub fn new(effects: Vec<Effect>) -> Result<Self> {
        let first = effects
            .first()
            .ok_or_else(|| Error::Shape("a measurement needs at least one effect".into()))?;
        let sig = first.signature().clone();
        for e in &effects {
            if e.signature() != &sig {
                return Err(Error::SignatureMismatch(
                    "effects of one measurement must share a signature".into(),
                ));
            }
        }
        Ok(Self { effects })
    }

    pub fn effects(&self) -> &[Effect] {
        &self.effects
    }

    pub fn outcome_count(&self) -> usize {
        self.effects.len()
    }

    pub fn signature(&self) -> &SystemSignature {
        self.effects[0].signature()
    }
}

/// Entrywise sum of a measurement's effects, possibly subnormalised: a
/// weight-`α` total array satisfies `M · P = α` on every valid state.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TotalArray {
    tensor: BoxTensor,
    weight: Rational,
}

impl TotalArray {
    /// Wraps a nonnegative tensor with its claimed weight. The claim is
    /// *checked* by [`validate_measurement`] / the decomposition routines,
    /// not here, so that invalid candidates can still be represented and
    /// diagnosed.
    pub fn new(tensor: BoxTensor, weight: Rational) -> Result<Self> {
        if tensor.entries().iter().any(Rational::is_negative) {
            return Err(Error::Shape("total arrays must be nonnegative".into()));
        }
        if weight.is_negative() || weight > Rational::one() {
            return Err(Error::Shape(format!("weight {weight} outside [0, 1]")));
        }
        Ok(Self { tensor, weight })
    }

    /// Infers the weight as the dot with the maximally mixed state.
    pub fn from_tensor(tensor: BoxTensor) -> Result<Self> {
        let mixed = maximally_mixed(tensor.signature());
        let weight = tensor.dot(mixed.tensor())?;
        Self::new(tensor, weight)
    }

    pub fn tensor(&self) -> &BoxTensor {
        &self.tensor
    }

    pub fn weight(&self) -> &Rational {
        &self.weight
    }

    pub fn signature(&self) -> &SystemSignature {
        self.tensor.signature()
    }

    /// Exact check that this really is a weight-`α` total array: nonnegative
    /// entries, dot `α` with the maximally mixed state, and orthogonality to
    /// the affine certificate basis.
    pub fn is_valid(&self) -> bool {
        let mixed = maximally_mixed(self.signature());
        if self.tensor.dot(mixed.tensor()).expect("signatures match") != self.weight {
            return false;
        }
        affine_certificate(self.signature())
            .iter()
            .all(|k| self.tensor.dot(k).expect("signatures match").is_zero())
    }
}

/// `M = Σ_r R_r` with weight 1 claimed; whether the claim holds is decided
/// by [`validate_measurement`].
pub fn total_array(m: &Measurement) -> TotalArray {
    let mut sum = BoxTensor::zeros(m.signature().clone());
    for e in m.effects() {
        sum = sum.add(e.tensor()).expect("effects share a signature");
    }
    TotalArray::new(sum, Rational::one()).expect("sums of effects are nonnegative")
}

// ---------------------------------------------------------------------------
// Validity via affine certificates
// ---------------------------------------------------------------------------

/// Exact basis of the linear span of state differences
/// `{P − P' : P, P' valid}`: the kernel of the normalisation +
/// no-signalling equality system. A tensor `M` satisfies `M·P = c` for all
/// valid states iff it is orthogonal to every basis vector and hits `c` on
/// one interior state.
pub fn affine_certificate(sig: &SystemSignature) -> Vec<BoxTensor> {
    kernel_basis(state_equality_system(sig).rows())
        .into_iter()
        .map(|v| BoxTensor::from_values(sig.clone(), v).expect("kernel vectors have entry length"))
        .collect()
}

#[derive(Clone, Debug)]
pub struct MeasurementDiagnostics {
    /// Every effect entry lies in `[0, 1]`.
    pub effects_in_range: bool,
    /// `M` dotted with the maximally mixed state gives exactly 1.
    pub unit_on_mixed: bool,
    /// `M` is orthogonal to every affine-certificate basis vector.
    pub certificate_orthogonal: bool,
    pub failures: Vec<String>,
}

impl MeasurementDiagnostics {
    pub fn is_valid(&self) -> bool {
        self.effects_in_range && self.unit_on_mixed && self.certificate_orthogonal
    }
}

/// Decides `Σ_r R_r · P = 1` for all valid states by the affine certificate.
pub fn validate_measurement(m: &Measurement) -> MeasurementDiagnostics {
    let mut failures = Vec::new();

    // Effects enforce their range on construction; re-scan so diagnostics
    // stay meaningful for values smuggled in by future refactors.
    let effects_in_range = m
        .effects()
        .iter()
        .all(|e| e.tensor().entries().iter().all(in_unit_interval));
    if !effects_in_range {
        failures.push("an effect entry lies outside [0, 1]".into());
    }

    let total = total_array(m);
    let mixed = maximally_mixed(m.signature());
    let on_mixed = total
        .tensor()
        .dot(mixed.tensor())
        .expect("signatures match");
    let unit_on_mixed = on_mixed.is_one();
    if !unit_on_mixed {
        failures.push(format!(
            "total array gives {on_mixed} on the maximally mixed state, not 1"
        ));
    }

    let mut certificate_orthogonal = true;
    for (i, k) in affine_certificate(m.signature()).iter().enumerate() {
        let d = total.tensor().dot(k).expect("signatures match");
        if !d.is_zero() {
            certificate_orthogonal = false;
            failures.push(format!(
                "total array has dot {d} with affine-certificate vector {i}"
            ));
        }
    }

    MeasurementDiagnostics {
        effects_in_range,
        unit_on_mixed,
        certificate_orthogonal,
        failures,
    }
}

/// True when the two effects give the same probability on every valid
/// state: their difference must vanish on the maximally mixed state and be
/// orthogonal to the affine-certificate basis.
pub fn effects_equivalent(r1: &Effect, r2: &Effect) -> Result<bool> {
    r1.tensor().check_same_signature(r2.tensor())?;
    let diff = r1.tensor().sub(r2.tensor())?;
    let mixed = maximally_mixed(r1.signature());
    if !diff.dot(mixed.tensor())?.is_zero() {
        return Ok(false);
    }
    for k in affine_certificate(r1.signature()) {
        if !diff.dot(&k)?.is_zero() {
            return Ok(false);
        }
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// Separable decomposition
// ---------------------------------------------------------------------------

/// One term of a separable effect decomposition: `weight` times a product of
/// per-subsystem single-entry effects.
#[derive(Clone, Debug)]
pub struct ProductEffectTerm {
    pub weight: Rational,
    /// One single-subsystem effect per subsystem, each with a single unit
    /// entry; their tensor product has a single unit entry on the joint
    /// system.
    pub factors: Vec<Effect>,
}

impl ProductEffectTerm {
    /// Tensor of `weight · (factor_1 ⊗ ... ⊗ factor_n)`.
    pub fn tensor(&self) -> BoxTensor {
        let mut product = self.factors[0].tensor().clone();
        for f in &self.factors[1..] {
            product = product.tensor_product(f.tensor());
        }
        product.scale(&self.weight)
    }
}

/// Writes an effect as a finite sum of weighted product effects, one term
/// per nonzero entry: an array with a single entry in `(0, 1]` is a product
/// of per-subsystem single-entry effects, so no effect is entangled.
pub fn decompose_separable_effect(effect: &Effect) -> Vec<ProductEffectTerm> {
    let sig = effect.signature();
    let mut terms = Vec::new();
    for (a, x, v) in effect.tensor().iter() {
        if v.is_zero() {
            continue;
        }
        let factors: Vec<Effect> = (0..sig.subsystem_count())
            .map(|i| {
                let sub_sig = sig.restrict(&[i]).expect("subsystem index in range");
                Effect::unit_entry(&sub_sig, &[a[i]], &[x[i]], Rational::one())
                    .expect("unit entries are effects")
            })
            .collect();
        terms.push(ProductEffectTerm {
            weight: v.clone(),
            factors,
        });
    }
    terms
}

// ---------------------------------------------------------------------------
// Outcome distribution and post-selection simulation
// ---------------------------------------------------------------------------

/// Exact outcome probabilities `Pr(r) = R_r · P`. Requires a valid
/// measurement; the probabilities then sum to exactly 1.
pub fn outcome_distribution(m: &Measurement, p: &State) -> Result<Vec<Rational>> {
    let diagnostics = validate_measurement(m);
    if !diagnostics.is_valid() {
        return Err(Error::InvalidMeasurement(diagnostics.failures.join("; ")));
    }
    m.signature()
        .eq(p.signature())
        .then_some(())
        .ok_or_else(|| Error::SignatureMismatch("measurement vs state".into()))?;
    let dist: Result<Vec<Rational>> = m
        .effects()
        .iter()
        .map(|e| e.tensor().dot(p.tensor()))
        .collect();
    let dist = dist?;
    let sum: Rational = dist.iter().cloned().sum();
    assert!(
        sum.is_one(),
        "valid measurement probabilities must sum to 1"
    );
    Ok(dist)
}

/// Exact categorical draw: picks index `i` with probability
/// `weights[i] / Σ weights`, by integerising the weights over their common
/// denominator and drawing a uniform integer below the total. Panics when
/// the weights are empty, negative or all zero.
pub fn sample_categorical<R: Rng + ?Sized>(weights: &[Rational], rng: &mut R) -> usize {
    assert!(!weights.is_empty(), "categorical draw over no weights");
    let mut denom = BigInt::one();
    for w in weights {
        assert!(!w.is_negative(), "categorical weights must be nonnegative");
        denom = denom.lcm(w.denom());
    }
    let ints: Vec<BigUint> = weights
        .iter()
        .map(|w| {
            (w.numer() * (&denom / w.denom()))
                .to_biguint()
                .expect("nonnegative weight")
        })
        .collect();
    sample_integer_weights(&ints, rng)
}

fn sample_integer_weights<R: Rng + ?Sized>(ints: &[BigUint], rng: &mut R) -> usize {
    use num_bigint::RandBigInt;
    let total: BigUint = ints.iter().sum();
    assert!(!total.is_zero(), "categorical weights are all zero");
    let mut draw = rng.gen_biguint_below(&total);
    for (i, w) in ints.iter().enumerate() {
        if draw < *w {
            return i;
        }
        draw -= w;
    }
    unreachable!("draw below total always lands in a bucket")
}

/// Seeded Monte-Carlo run of the post-selection protocol together with the
/// exact quantities it should reproduce.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimulationReport {
    pub samples: u64,
    pub seed: u64,
    /// Announcements per outcome label.
    pub counts: Vec<u64>,
    /// Trials that declared failure.
    pub failures: u64,
    /// Exact conditional distribution `Pr(r | success) = R_r · P`.
    pub expected: Vec<Rational>,
    /// Exact success probability `q / max M` with `q` the probability of
    /// each joint setting.
    pub expected_success_rate: Rational,
}

impl SimulationReport {
    pub fn successes(&self) -> u64 {
        self.samples - self.failures
    }

    /// Observed conditional frequencies as exact ratios of counts.
    pub fn empirical_conditional(&self) -> Vec<Rational> {
        let n = self.successes();
        self.counts
            .iter()
            .map(|&c| {
                if n == 0 {
                    Rational::zero()
                } else {
                    Rational::new((c as i64).into(), (n as i64).into())
                }
            })
            .collect()
    }
}

/// Simulates the measurement with fiducial measurements and post-selection.
///
/// Each trial draws a joint setting `x` uniformly, samples `a` from
/// `P(·|x)`, then announces outcome `r` with probability
/// `R_r(a|x) / max_{a,x} M(a|x)` and failure with the remaining
/// probability. Conditioned on success, the outcome distribution equals
/// [`outcome_distribution`] exactly in expectation.
///
/// Trial `i` draws from an independent substream selected by `(seed, i)`,
/// so reports are reproducible and independent of trial scheduling.
pub fn simulate_postselect(
    m: &Measurement,
    p: &State,
    samples: u64,
    seed: u64,
) -> Result<SimulationReport> {
    let expected = outcome_distribution(m, p)?; // also validates m
    let sig = m.signature().clone();

    let total = total_array(m);
    let max_entry = total
        .tensor()
        .entries()
        .iter()
        .max()
        .cloned()
        .expect("total arrays are nonempty");
    if max_entry.is_zero() {
        return Err(Error::InvalidMeasurement(
            "total array is identically zero".into(),
        ));
    }

    let settings: Vec<Vec<usize>> = sig.settings().collect();
    let setting_probability = Rational::new(1.into(), (settings.len() as i64).into());
    let expected_success_rate = &setting_probability / &max_entry;

    // Integerised outcome weights per setting block, and integerised
    // announcement weights (effect values plus failure slack) per entry.
    let state_blocks: Vec<(Vec<Vec<usize>>, Vec<BigUint>)> = settings
        .iter()
        .map(|x| {
            let outcomes: Vec<Vec<usize>> = sig.outcomes(x).collect();
            let probs: Vec<Rational> = outcomes
                .iter()
                .map(|a| p.tensor().get(a, x).clone())
                .collect();
            (outcomes, integerize(&probs))
        })
        .collect();
    let announce: Vec<Vec<BigUint>> = settings
        .iter()
        .flat_map(|x| {
            let sig = &sig;
            let m = &m;
            let total = &total;
            let max_entry = &max_entry;
            sig.outcomes(x).map(move |a| {
                let mut weights: Vec<Rational> = m
                    .effects()
                    .iter()
                    .map(|e| e.tensor().get(&a, x).clone())
                    .collect();
                weights.push(max_entry - total.tensor().get(&a, x));
                integerize(&weights)
            })
        })
        .collect();
    let block_offsets = sig.block_offsets();

    let mut counts = vec![0u64; m.outcome_count()];
    let mut failures = 0u64;
    for trial in 0..samples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial);

        let x_rank = rng.gen_range(0..settings.len());
        let (_outcomes, weights) = &state_blocks[x_rank];
        let a_rank = sample_integer_weights(weights, &mut rng);

        let entry = block_offsets[x_rank] + a_rank;
        let r = sample_integer_weights(&announce[entry], &mut rng);
        if r < counts.len() {
            counts[r] += 1;
        } else {
            failures += 1;
        }
    }

    Ok(SimulationReport {
        samples,
        seed,
        counts,
        failures,
        expected,
        expected_success_rate,
    })
}

fn integerize(weights: &[Rational]) -> Vec<BigUint> {
    let mut denom = BigInt::one();
    for w in weights {
        denom = denom.lcm(w.denom());
    }
    weights
        .iter()
        .map(|w| {
            (w.numer() * (&denom / w.denom()))
                .to_biguint()
                .expect("weights are nonnegative")
        })
        .collect()
}
