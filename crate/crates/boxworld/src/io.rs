//! Bit-exact JSON file formats shared by the library, the CLI and the
//! examples.
//!
//! Rationals are decimal-integer strings `"p/q"` (or `"p"` for integers),
//! reduced with a positive denominator. Tensor entries are listed in the
//! canonical order fixed in [`crate::signature`]: setting blocks in
//! lexicographic setting order (subsystem 0 slowest), outcomes lexicographic
//! within each block.
//!
//! * tensor: `{ "signature": [[k,...],...], "entries": ["p/q", ...] }`
//! * measurement: `{ "signature": ..., "effects": [[entries...], ...] }`
//! * transformation: `{ "input_signature": ..., "output_signature": ...,
//!   "entries": [...] }` with the output index major
//! * swap scenario: `{ "P": tensor, "Q": tensor, "bob": measurement,
//!   "b1_count": n? }` (`b1_count` may be omitted when the split is
//!   inferable)
//! * decomposition: `{ "weights": [...], "arrays": [[entries...], ...] }`
//!   or `{ "infeasible": true, "certificate": [...] }` where the
//!   certificate lists the functional entries followed by the offset
//!
//! Serialisation goes through `serde_json::Value`, whose object keys are
//! sorted, so equal objects print byte-identically.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::measurements::{Effect, Measurement, SimulationReport, TotalArray};
use crate::protocols::{SwapReport, SwapScenario, Transformation};
use crate::rational::{format_rational, parse_rational, Rational};
use crate::signature::SystemSignature;
use crate::states::{State, ValidityReport, VertexClass, VertexSet};
use crate::tensor::BoxTensor;
use crate::wiring::{Decomposition, InfeasibilityCertificate};

// ---------------------------------------------------------------------------
// DTOs
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct TensorDto {
    signature: Vec<Vec<usize>>,
    entries: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct MeasurementDto {
    signature: Vec<Vec<usize>>,
    effects: Vec<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
struct TransformationDto {
    input_signature: Vec<Vec<usize>>,
    output_signature: Vec<Vec<usize>>,
    entries: Vec<String>,
}

#[derive(Deserialize)]
struct ScenarioDto {
    #[serde(rename = "P")]
    p: TensorDto,
    #[serde(rename = "Q")]
    q: TensorDto,
    bob: MeasurementDto,
    #[serde(default)]
    b1_count: Option<usize>,
}

fn rationals_to_strings(values: &[Rational]) -> Vec<String> {
    values.iter().map(format_rational).collect()
}

fn strings_to_rationals(values: &[String]) -> Result<Vec<Rational>> {
    values.iter().map(|s| parse_rational(s)).collect()
}

// ---------------------------------------------------------------------------
// Tensors and signatures
// ---------------------------------------------------------------------------

pub fn signature_from_json(v: &Value) -> Result<SystemSignature> {
    let lists: Vec<Vec<usize>> = serde_json::from_value(v.clone())?;
    SystemSignature::new(lists)
}

pub fn tensor_to_json(t: &BoxTensor) -> Value {
    json!({
        "signature": t.signature().subsystems(),
        "entries": rationals_to_strings(t.entries()),
    })
}

pub fn tensor_from_json(v: &Value) -> Result<BoxTensor> {
    let dto: TensorDto = serde_json::from_value(v.clone())?;
    let sig = SystemSignature::new(dto.signature)?;
    BoxTensor::from_values(sig, strings_to_rationals(&dto.entries)?)
}

pub fn state_from_json(v: &Value) -> Result<State> {
    State::new(tensor_from_json(v)?)
}

// ---------------------------------------------------------------------------
// Measurements
// ---------------------------------------------------------------------------

pub fn measurement_to_json(m: &Measurement) -> Value {
    json!({
        "signature": m.signature().subsystems(),
        "effects": m
            .effects()
            .iter()
            .map(|e| rationals_to_strings(e.tensor().entries()))
            .collect::<Vec<_>>(),
    })
}

pub fn measurement_from_json(v: &Value) -> Result<Measurement> {
    let dto: MeasurementDto = serde_json::from_value(v.clone())?;
    let sig = SystemSignature::new(dto.signature)?;
    let effects: Result<Vec<Effect>> = dto
        .effects
        .iter()
        .map(|entries| {
            Effect::new(BoxTensor::from_values(
                sig.clone(),
                strings_to_rationals(entries)?,
            )?)
        })
        .collect();
    Measurement::new(effects?)
}

// ---------------------------------------------------------------------------
// Transformations and scenarios
// ---------------------------------------------------------------------------

pub fn transformation_to_json(t: &Transformation) -> Value {
    json!({
        "input_signature": t.input_signature().subsystems(),
        "output_signature": t.output_signature().subsystems(),
        "entries": rationals_to_strings(t.entries()),
    })
}

pub fn transformation_from_json(v: &Value) -> Result<Transformation> {
    let dto: TransformationDto = serde_json::from_value(v.clone())?;
    Transformation::new(
        SystemSignature::new(dto.input_signature)?,
        SystemSignature::new(dto.output_signature)?,
        strings_to_rationals(&dto.entries)?,
    )
}

pub fn scenario_to_json(s: &SwapScenario) -> Value {
    json!({
        "P": tensor_to_json(s.p().tensor()),
        "Q": tensor_to_json(s.q().tensor()),
        "bob": measurement_to_json(s.bob()),
        "b1_count": s.b1_count(),
    })
}

pub fn scenario_from_json(v: &Value) -> Result<SwapScenario> {
    let dto: ScenarioDto = serde_json::from_value(v.clone())?;
    let p = State::new(tensor_from_json(&serde_json::to_value(&dto.p)?)?)?;
    let q = State::new(tensor_from_json(&serde_json::to_value(&dto.q)?)?)?;
    let bob = measurement_from_json(&serde_json::to_value(&dto.bob)?)?;
    match dto.b1_count {
        Some(b1) => {
            let nb = bob.signature().subsystem_count();
            let b2 = nb.checked_sub(b1).ok_or_else(|| {
                Error::Shape(format!("b1_count {b1} exceeds Bob's {nb} subsystems"))
            })?;
            SwapScenario::new(p, q, bob, b1, b2)
        }
        None => SwapScenario::with_inferred_split(p, q, bob),
    }
}

// ---------------------------------------------------------------------------
// Reports and results
// ---------------------------------------------------------------------------

pub fn validity_report_to_json(r: &ValidityReport) -> Value {
    json!({
        "valid": r.is_valid(),
        "positive": r.positive,
        "normalised": r.normalised,
        "no_signalling": r.no_signalling,
        "normalised_all_settings": r.normalised_all_settings,
        "failures": r.failures,
    })
}

pub fn vertex_set_to_json(vs: &VertexSet) -> Value {
    json!({
        "signature": vs.signature.subsystems(),
        "vertices": vs
            .vertices
            .iter()
            .map(|s| rationals_to_strings(s.tensor().entries()))
            .collect::<Vec<_>>(),
        "classes": vs
            .classes
            .iter()
            .map(|c| match c {
                VertexClass::DeterministicLocal => "deterministic-local",
                VertexClass::Nonlocal => "nonlocal",
            })
            .collect::<Vec<_>>(),
    })
}

pub fn decomposition_to_json(d: &Decomposition) -> Value {
    json!({
        "weights": d.terms.iter().map(|t| format_rational(&t.weight)).collect::<Vec<_>>(),
        "arrays": d
            .terms
            .iter()
            .map(|t| rationals_to_strings(t.array.tensor().entries()))
            .collect::<Vec<_>>(),
    })
}

/// Certificate as one flat vector: functional entries in canonical order,
/// then the offset multiplying the weight constraint.
pub fn infeasibility_to_json(c: &InfeasibilityCertificate) -> Value {
    let mut flat = rationals_to_strings(c.functional.entries());
    flat.push(format_rational(&c.offset));
    json!({
        "infeasible": true,
        "certificate": flat,
    })
}

pub fn simulation_report_to_json(r: &SimulationReport) -> Value {
    json!({
        "samples": r.samples,
        "seed": r.seed,
        "counts": r.counts,
        "failures": r.failures,
        "successes": r.successes(),
        "expected": rationals_to_strings(&r.expected),
        "expected_success_rate": format_rational(&r.expected_success_rate),
        "empirical_conditional": rationals_to_strings(&r.empirical_conditional()),
    })
}

pub fn swap_report_to_json(r: &SwapReport) -> Value {
    json!({
        "all_separable": r.all_separable(),
        "outcomes": r
            .outcomes
            .iter()
            .map(|o| {
                json!({
                    "outcome": o.outcome,
                    "probability": format_rational(&o.probability),
                    "evaluated": o.evaluated,
                    "separable": o.separable,
                    "reconstruction_exact": o.reconstruction_exact,
                    "lambda_terms": o.lambda_terms,
                })
            })
            .collect::<Vec<_>>(),
    })
}

/// Canonical text form: pretty-printed with sorted keys and a trailing
/// newline, so identical objects diff cleanly.
pub fn to_canonical_string(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("values serialize");
    s.push('\n');
    s
}

/// Total array carried as a bare tensor file; the weight is inferred from
/// the maximally mixed state.
pub fn total_array_from_json(v: &Value) -> Result<TotalArray> {
    TotalArray::from_tensor(tensor_from_json(v)?)
}
