//! Error type shared by the whole crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed index data: wrong arity, out-of-range component, missing or
    /// duplicate entry.
    #[error("shape error: {0}")]
    Shape(String),

    /// Two tensors that must share a signature do not.
    #[error("signature mismatch: {0}")]
    SignatureMismatch(String),

    /// A string did not parse as an exact rational.
    #[error("invalid rational literal `{0}`")]
    InvalidRational(String),

    /// A tensor failed state validation (positivity, normalisation or
    /// no-signalling).
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// A list of effects failed measurement validation.
    #[error("invalid measurement: {0}")]
    InvalidMeasurement(String),

    /// An effect entry fell outside [0, 1].
    #[error("invalid effect: {0}")]
    InvalidEffect(String),

    /// A transformation array maps some valid state outside the state space.
    #[error("invalid transformation: {0}")]
    InvalidTransformation(String),

    /// Conditioning on an outcome of probability zero.
    #[error("zero-probability outcome: {0}")]
    ZeroProbability(String),

    /// The greedy subtraction loop found the obstruction pattern: a zero can
    /// be picked in every block, so no subnormalised basic array can be
    /// subtracted. For nonnegative arrays this certifies the input is not a
    /// valid (subnormalised) total measurement array.
    #[error("greedy decomposition blocked: {0}")]
    Blocked(String),

    /// The greedy decomposition only covers one- and two-subsystem arrays.
    #[error(
        "greedy decomposition supports 1 or 2 subsystems, got {subsystems}; \
         use lp_decompose for larger systems"
    )]
    GreedyUnsupported { subsystems: usize },

    /// A desk-scale enumeration guard tripped.
    #[error("size guard exceeded: {what} = {actual} > limit {limit}")]
    GuardExceeded {
        what: &'static str,
        actual: usize,
        limit: usize,
    },

    /// Inputs that must agree (e.g. a decomposition and the measurement it
    /// claims to decompose) do not.
    #[error("inconsistent inputs: {0}")]
    Inconsistent(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
