use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown qubit label `{0}`")]
    UnknownLabel(String),
    #[error("duplicate qubit label `{0}`")]
    DuplicateLabel(String),
    #[error("gate {kind} expects {expected} target(s), got {got}")]
    ArityMismatch {
        kind: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{kind} state with {qubits} qubits exceeds the cap of {cap}")]
    CapExceeded {
        kind: &'static str,
        qubits: usize,
        cap: usize,
    },
    #[error("expected {expected} entries, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("state has zero norm")]
    ZeroNorm,
    #[error("cannot discard every qubit of a state")]
    DiscardAll,
    #[error("requested branch {outcome:+} has probability {probability:e}")]
    ImpossibleBranch { outcome: i8, probability: f64 },
    #[error("invalid basis string `{0}`")]
    InvalidBasisString(String),
    #[error("invalid eigen-string symbol `{0}` (expected 1-4)")]
    InvalidSymbol(char),
    #[error("unphysical input: {0}")]
    Unphysical(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("retry limit of {0} attempts reached")]
    RetryLimit(u64),
    #[error("input pool exhausted after {0} draws")]
    InputsExhausted(u64),
    #[error("no correction found for branch {0}")]
    NoCorrection(String),
    #[error("failure rate 10^{log10:.3} is at or above threshold 10^{threshold:.3}")]
    AboveThreshold { log10: f64, threshold: f64 },
    #[error("target unreachable within {0} levels")]
    Unreachable(usize),
    #[error("state is not in the span of |psi2> and |11> (residual {0:e})")]
    OutsideSpan(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
