use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("permutation size must be at least 1")]
    EmptyPermutation,

    #[error("not a permutation of 0..{len}: {reason}")]
    InvalidPermutation { len: usize, reason: String },

    #[error("size mismatch: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },

    #[error("sampling sequence is empty")]
    EmptySequence,

    #[error("label {label} repeated in a without-replacement sequence")]
    RepeatedLabel { label: usize },

    #[error("label {label} out of range for pool of size {pool_size}")]
    LabelOutOfRange { label: usize, pool_size: usize },

    #[error("cannot draw {len} distinct labels from a pool of size {pool_size}")]
    InfeasibleSampling { len: usize, pool_size: usize },

    #[error("N = {n} outside the permitted range 1..={max}{hint}")]
    EnumerationRange { n: usize, max: usize, hint: &'static str },

    #[error("K = {k} outside 0..={max} for N = {n}")]
    KOutOfRange { k: usize, n: usize, max: usize },

    #[error("malformed delta network: {0}")]
    MalformedNetwork(String),

    #[error("brute-force summation infeasible: M^(2(N-1)) = {work} exceeds {limit}")]
    OracleTooLarge { work: u128, limit: u128 },

    #[error("ballistic expansion supports N <= {max}, got {n}")]
    ExpansionTooLarge { n: usize, max: usize },

    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("invalid pipeline configuration: {0}")]
    InvalidConfig(String),

    #[error("integer overflow computing {0}")]
    Overflow(&'static str),

    #[error("{0}")]
    Unsupported(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
