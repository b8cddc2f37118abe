use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit index {index} out of range for {qubits}-qubit register")]
    QubitOutOfRange { index: usize, qubits: usize },

    #[error("CX control and target must differ (both {0})")]
    CxSameQubit(usize),

    #[error("unsupported qubit count {0} (expected 1..=5)")]
    QubitCount(usize),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("cannot pad a {from}-qubit unitary to {to} qubits")]
    PadTooSmall { from: usize, to: usize },

    #[error("no matrix entry exceeds the phase threshold {0}")]
    NoPhaseReference(f64),

    #[error("singular value routine did not converge after {0} sweeps")]
    NoConvergence(usize),

    #[error("invalid permutation {0:?}")]
    InvalidPermutation(Vec<usize>),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("bad file format: {0}")]
    Format(String),

    #[error("checksum mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    Checksum { stored: u32, computed: u32 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(
        "rejection budget of {attempts} exhausted for T-count {t_count} with gate count range [{min_gates}, {max_gates}]"
    )]
    RejectionBudget {
        attempts: usize,
        t_count: usize,
        min_gates: usize,
        max_gates: usize,
    },

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("data stream exhausted")]
    StreamExhausted,

    #[error("state budget exceeded: {visited} states visited, frontier {frontier}")]
    StateBudget { visited: usize, frontier: usize },

    #[error("unknown structured target {0:?}")]
    UnknownTarget(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}
