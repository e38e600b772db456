//! Exact-arithmetic toolkit for "box world": the operational model whose
//! states are all positive, normalised, no-signalling probability arrays.
//!
//! The crate provides, over exact rationals throughout:
//!
//! * dense tensors over joint `(outcome, setting)` index sets and their
//!   algebra ([`tensor`]);
//! * state validation, polytope vertices, collapse, locality tests and the
//!   CHSH functional ([`states`]);
//! * effects, measurement validation via affine certificates, separable
//!   effect decomposition and a seeded post-selection simulator
//!   ([`measurements`]);
//! * adaptive wirings ("basic measurements"), the greedy and LP
//!   decompositions of total measurement arrays, and the tripartite
//!   measurement that no wiring mixture reproduces ([`wiring`]);
//! * the entanglement-swapping harness and transformation machinery
//!   ([`protocols`]);
//! * exact kernel bases and LP feasibility with Farkas certificates
//!   ([`exact`]);
//! * the shared JSON file formats ([`io`]) and a thin command-line front end
//!   ([`cli`]).
//!
//! Start with the runnable examples in `examples/`; each demonstrates one
//! capability end to end.

pub mod cli;
pub mod error;
pub mod exact;
pub mod io;
pub mod measurements;
pub mod protocols;
pub mod random;
pub mod rational;
pub mod signature;
pub mod states;
pub mod tensor;
pub mod wiring;

pub use error::{Error, Result};
pub use measurements::{
    affine_certificate, decompose_separable_effect, effects_equivalent, outcome_distribution,
    simulate_postselect, total_array, validate_measurement, Effect, Measurement, SimulationReport,
    TotalArray,
};
pub use protocols::{
    apply_transformation, collapsed_ac_state, lambda_decomposition, swap_joint_distribution,
    validate_transformation, verify_no_swapping, SwapReport, SwapScenario, Transformation,
};
pub use rational::{format_rational, integer, parse_rational, ratio, Rational};
pub use signature::SystemSignature;
pub use states::{
    chsh, collapse, deterministic_vertices, is_local, maximally_mixed, mix, nosig_vertices, pr_box,
    validate_state, LocalityResult, State, ValidityReport, VertexClass, VertexSet,
};
pub use tensor::{BoxTensor, Relabelling, SubsystemRelabelling};
pub use wiring::{
    counterexample_tripartite, enumerate_basic_arrays, greedy_decompose, lp_decompose,
    randomized_protocol, tree_effects, tree_total_array, BasicTree, Decomposition,
    InfeasibilityCertificate, LpOutcome, RandomizedProtocol,
};
