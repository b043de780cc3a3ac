use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit count mismatch: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },

    #[error("invalid Pauli text {text:?}: {reason}")]
    ParsePauli { text: String, reason: String },

    #[error("qubit {qubit} out of range for {n} qubits")]
    QubitOutOfRange { qubit: usize, n: usize },

    #[error("two-qubit block needs distinct qubits, got {0} twice")]
    SameQubit(usize),

    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),

    #[error("parameter vector has length {got}, circuit expects {expected}")]
    ParamLength { expected: usize, got: usize },

    #[error("{what} needs at most {max} qubits for dense simulation, got {n}")]
    OversizeState { what: &'static str, n: usize, max: usize },

    #[error("surrogate graph exceeded its node budget of {budget} (reached {nodes} nodes)")]
    NodeBudget { budget: usize, nodes: usize },

    #[error("surrogate build requires a finite weight cap")]
    UnboundedWeight,

    #[error("missing feature for operator {0}")]
    MissingFeature(String),

    #[error("empty shadow record set")]
    EmptyShadows,

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("cannot label {model} point {params}: {reason}")]
    Unlabelable { model: &'static str, params: String, reason: String },

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("malformed {format} at line {line}: {reason}")]
    Format { format: &'static str, line: usize, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(format: &'static str, line: usize, reason: impl Into<String>) -> Self {
        Error::Format { format, line, reason: reason.into() }
    }
}
