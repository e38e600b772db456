//! Command-line front end over the shared JSON formats.
//!
//! Exit codes: 0 for an affirmative or valid result, 1 for a negative or
//! invalid determination (with a machine-readable reason on stdout), 2 for
//! usage, IO or guard errors. `-` means stdin for inputs.

use std::io::Read;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::error::Error;
use crate::io as fmt;
use crate::measurements::{simulate_postselect, total_array, validate_measurement};
use crate::protocols::{validate_transformation, verify_no_swapping, SwapScenario};
use crate::rational::format_rational;
use crate::states::{
    chsh, collapse, deterministic_vertices, is_local, nosig_vertices, pr_box, validate_state,
    LocalityResult, State,
};
use crate::wiring::{counterexample_tripartite, greedy_decompose, lp_decompose, LpOutcome};

#[derive(Parser)]
#[command(
    name = "boxworld",
    version,
    about = "Exact toolkit for box-world states, measurements and wirings"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Greedy,
    Lp,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Fixture {
    /// The PR box state (tensor JSON).
    PrBox,
    /// The tripartite measurement with no wiring decomposition
    /// (measurement JSON).
    Counterexample,
}

#[derive(Subcommand)]
enum Command {
    /// Check positivity, normalisation and no-signalling of a tensor file.
    ValidateState { file: String },
    /// Check a measurement file against the affine certificate.
    ValidateMeasurement { file: String },
    /// CHSH value of a two-party binary state.
    Chsh { file: String },
    /// Enumerate polytope vertices for a signature.
    Vertices {
        /// Signature as JSON, e.g. "[[2,2],[2,2]]".
        #[arg(long)]
        signature: String,
        /// All no-signalling vertices (the default).
        #[arg(long, conflicts_with = "local")]
        nosig: bool,
        /// Only the deterministic local vertices.
        #[arg(long)]
        local: bool,
    },
    /// Condition a state on outcomes observed on some subsystems.
    Collapse {
        file: String,
        #[arg(long, value_delimiter = ',', required = true)]
        subsystems: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        settings: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        outcomes: Vec<usize>,
    },
    /// Exact membership in the hull of deterministic product vertices.
    IsLocal { file: String },
    /// Decompose a measurement (or bare total-array tensor) into basic
    /// arrays.
    Decompose {
        file: String,
        #[arg(long, value_enum, default_value = "greedy")]
        method: Method,
    },
    /// Monte-Carlo post-selection simulation of a measurement on a state.
    Simulate {
        #[arg(long)]
        state: String,
        #[arg(long)]
        measurement: String,
        #[arg(long)]
        samples: u64,
        #[arg(long)]
        seed: u64,
    },
    /// Entanglement-swapping check: collapsed AC states and separability.
    Swap {
        /// State of A,B1 (tensor JSON).
        #[arg(long, requires = "bc", requires = "bob", conflicts_with = "scenario")]
        ab: Option<String>,
        /// State of B2,C (tensor JSON).
        #[arg(long)]
        bc: Option<String>,
        /// Bob's measurement on B1,B2 (measurement JSON).
        #[arg(long)]
        bob: Option<String>,
        /// Whole scenario in one file.
        #[arg(long)]
        scenario: Option<String>,
        /// Number of trailing subsystems of the AB state forming B1.
        #[arg(long)]
        b1_count: Option<usize>,
    },
    /// Check that a transformation maps every state to a state.
    ValidateTransformation {
        file: String,
        /// Expected input signature as JSON (cross-checked when given).
        #[arg(long)]
        signature: Option<String>,
    },
    /// Emit a canonical JSON fixture.
    Fixtures {
        #[arg(value_enum)]
        name: Fixture,
    },
}

/// Parses `argv` and runs; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own message; usage errors exit 2, --help/-V 0.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok((value, code)) => {
            print!("{}", fmt::to_canonical_string(&value));
            code
        }
        Err(e) => {
            let code = error_code(&e);
            let value = json!({ "error": e.to_string() });
            print!("{}", fmt::to_canonical_string(&value));
            code
        }
    }
}

/// Negative determinations exit 1; malformed inputs, IO and guards exit 2.
fn error_code(e: &Error) -> i32 {
    match e {
        Error::InvalidState(_)
        | Error::InvalidMeasurement(_)
        | Error::InvalidEffect(_)
        | Error::InvalidTransformation(_)
        | Error::Blocked(_)
        | Error::ZeroProbability(_) => 1,
        Error::Shape(_)
        | Error::SignatureMismatch(_)
        | Error::InvalidRational(_)
        | Error::GreedyUnsupported { .. }
        | Error::GuardExceeded { .. }
        | Error::Inconsistent(_)
        | Error::Io(_)
        | Error::Json(_) => 2,
    }
}

fn read_input(path: &str) -> crate::error::Result<Value> {
    let text = if path == "-" {
        let mut buf = String::new();
        std::io::stdin().read_to_string(&mut buf)?;
        buf
    } else {
        std::fs::read_to_string(path)?
    };
    Ok(serde_json::from_str(&text)?)
}

fn read_state(path: &str) -> crate::error::Result<State> {
    fmt::state_from_json(&read_input(path)?)
}

fn dispatch(command: Command) -> crate::error::Result<(Value, i32)> {
    match command {
        Command::ValidateState { file } => {
            let tensor = fmt::tensor_from_json(&read_input(&file)?)?;
            let report = validate_state(&tensor);
            let code = if report.is_valid() { 0 } else { 1 };
            Ok((fmt::validity_report_to_json(&report), code))
        }

        Command::ValidateMeasurement { file } => {
            let m = fmt::measurement_from_json(&read_input(&file)?)?;
            let d = validate_measurement(&m);
            let code = if d.is_valid() { 0 } else { 1 };
            Ok((
                json!({
                    "valid": d.is_valid(),
                    "effects_in_range": d.effects_in_range,
                    "unit_on_mixed": d.unit_on_mixed,
                    "certificate_orthogonal": d.certificate_orthogonal,
                    "failures": d.failures,
                }),
                code,
            ))
        }

        Command::Chsh { file } => {
            let state = read_state(&file)?;
            let value = chsh(&state)?;
            Ok((Value::String(format_rational(&value)), 0))
        }

        Command::Vertices {
            signature,
            nosig,
            local,
        } => {
            let sig = fmt::signature_from_json(&serde_json::from_str(&signature)?)?;
            let set = if local {
                deterministic_vertices(&sig)
            } else {
                let _ = nosig; // the default view
                nosig_vertices(&sig)?
            };
            Ok((fmt::vertex_set_to_json(&set), 0))
        }

        Command::Collapse {
            file,
            subsystems,
            settings,
            outcomes,
        } => {
            let state = read_state(&file)?;
            let collapsed = collapse(&state, &subsystems, &settings, &outcomes)?;
            Ok((fmt::tensor_to_json(collapsed.tensor()), 0))
        }

        Command::IsLocal { file } => {
            let state = read_state(&file)?;
            match is_local(&state)? {
                LocalityResult::Local { weights } => Ok((
                    json!({
                        "local": true,
                        "weights": weights.iter().map(format_rational).collect::<Vec<_>>(),
                    }),
                    0,
                )),
                LocalityResult::Nonlocal { certificate } => Ok((
                    json!({
                        "local": false,
                        "certificate": {
                            "functional": certificate
                                .functional
                                .entries()
                                .iter()
                                .map(format_rational)
                                .collect::<Vec<_>>(),
                            "offset": format_rational(&certificate.offset),
                        },
                    }),
                    1,
                )),
            }
        }

        Command::Decompose { file, method } => {
            let input = read_input(&file)?;
            // Accept a measurement file or a bare total-array tensor.
            let array = if input.get("effects").is_some() {
                total_array(&fmt::measurement_from_json(&input)?)
            } else {
                fmt::total_array_from_json(&input)?
            };
            match method {
                Method::Greedy => match greedy_decompose(&array) {
                    Ok(d) => Ok((fmt::decomposition_to_json(&d), 0)),
                    Err(Error::Blocked(reason)) => {
                        Ok((json!({ "blocked": true, "reason": reason }), 1))
                    }
                    Err(e) => Err(e),
                },
                Method::Lp => match lp_decompose(&array)? {
                    LpOutcome::Decomposed(d) => Ok((fmt::decomposition_to_json(&d), 0)),
                    LpOutcome::Infeasible(cert) => Ok((fmt::infeasibility_to_json(&cert), 1)),
                },
            }
        }

        Command::Simulate {
            state,
            measurement,
            samples,
            seed,
        } => {
            let p = read_state(&state)?;
            let m = fmt::measurement_from_json(&read_input(&measurement)?)?;
            let report = simulate_postselect(&m, &p, samples, seed)?;
            Ok((fmt::simulation_report_to_json(&report), 0))
        }

        Command::Swap {
            ab,
            bc,
            bob,
            scenario,
            b1_count,
        } => {
            let scenario = match (ab, bc, bob, scenario) {
                (None, None, None, Some(path)) => fmt::scenario_from_json(&read_input(&path)?)?,
                (Some(ab), Some(bc), Some(bob), None) => {
                    let p = read_state(&ab)?;
                    let q = read_state(&bc)?;
                    let m = fmt::measurement_from_json(&read_input(&bob)?)?;
                    match b1_count {
                        Some(b1) => {
                            let nb = m.signature().subsystem_count();
                            let b2 = nb.checked_sub(b1).ok_or_else(|| {
                                Error::Shape(format!("b1_count {b1} exceeds Bob's {nb} subsystems"))
                            })?;
                            SwapScenario::new(p, q, m, b1, b2)?
                        }
                        None => SwapScenario::with_inferred_split(p, q, m)?,
                    }
                }
                _ => {
                    return Err(Error::Shape(
                        "pass either --scenario or all of --ab, --bc, --bob".into(),
                    ))
                }
            };
            let report = verify_no_swapping(&scenario)?;
            let code = if report.all_separable() { 0 } else { 1 };
            Ok((fmt::swap_report_to_json(&report), code))
        }

        Command::ValidateTransformation { file, signature } => {
            let t = fmt::transformation_from_json(&read_input(&file)?)?;
            if let Some(sig_text) = signature {
                let sig = fmt::signature_from_json(&serde_json::from_str(&sig_text)?)?;
                if &sig != t.input_signature() {
                    return Err(Error::SignatureMismatch(format!(
                        "--signature {:?} vs file input signature {:?}",
                        sig.subsystems(),
                        t.input_signature().subsystems()
                    )));
                }
            }
            let valid = validate_transformation(&t)?;
            let code = if valid { 0 } else { 1 };
            Ok((json!({ "valid": valid }), code))
        }

        Command::Fixtures { name } => {
            let value = match name {
                Fixture::PrBox => fmt::tensor_to_json(pr_box().tensor()),
                Fixture::Counterexample => fmt::measurement_to_json(&counterexample_tripartite()),
            };
            Ok((value, 0))
        }
    }
}
