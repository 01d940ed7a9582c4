use thiserror::Error;

/// Errors shared across the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("variable group `{0}` already exists")]
    DuplicateGroup(String),

    #[error("unknown variable group `{0}`")]
    UnknownGroup(String),

    #[error("clause references unallocated variable {0}")]
    UnallocatedVar(u32),

    #[error("circuit is cyclic or references a node that is not yet defined")]
    CyclicCircuit,

    #[error("alpha(c={c}, k={k}) is undefined: (2^c - 1)^2 must exceed k * 2^(c+1); smallest admissible c is {min_c}")]
    AlphaDomain { c: u32, k: u32, min_c: u32 },

    #[error("eta must lie strictly between 0 and 1, got {0}")]
    InvalidEta(f64),

    #[error("parity constraint sampled over an empty variable range")]
    EmptyParityRange,

    #[error("enumeration over {requested} variables exceeds the cap of {cap}")]
    EnumerationCap { requested: u32, cap: u32 },

    #[error("oracle timed out after {0} seconds")]
    Timeout(u64),

    #[error("external oracle protocol error: {0}")]
    Protocol(String),

    #[error("oracle returned a model that violates clause {0}")]
    InvalidModel(usize),

    #[error("witness returned by the oracle does not satisfy phi")]
    WitnessInconsistent,

    #[error("threshold exponent {q} exceeds the counting domain width {width}")]
    ThresholdTooLarge { q: u32, width: u32 },

    #[error("weight table is all-zero, maximum is undefined")]
    AllZeroWeights,

    #[error("weight-table domains overlap in a product embedding")]
    OverlappingDomains,

    #[error("{0}")]
    InvalidInstance(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
