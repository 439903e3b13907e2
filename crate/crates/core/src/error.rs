use thiserror::Error;

use crate::covering::Violation;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("modulus {0} is not prime")]
    NotPrime(String),
    #[error("modulus must satisfy 2 <= q < 2^256")]
    ModulusRange,
    #[error("operands belong to different fields")]
    ModulusMismatch,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("vectors and matrices must have positive dimensions")]
    EmptyDimension,
    #[error("value is not a canonical field element")]
    NonCanonical,
    #[error("additive sharing needs at least 2 shares, got {0}")]
    ShareCount(usize),
    #[error("reconstruction needs at least one share")]
    NoShares,
    #[error("invalid covering scheme: {0}")]
    InvalidScheme(Violation),
    #[error("pair ({u}, {v}) is not covered by any server")]
    Uncovered { u: usize, v: usize },
    #[error("search bound exceeded: {0}")]
    SearchBound(String),
    #[error("server {server} lacks {kind} share {index}")]
    MissingShare {
        server: usize,
        kind: &'static str,
        index: usize,
    },
    #[error("server index {0} is not part of the scheme")]
    UnknownServer(usize),
    #[error("results from server {server} are not keyed by its partition cell")]
    ResultKeys { server: usize },
    #[error("expected results from {expected} servers, got {found}")]
    ServerCount { expected: usize, found: usize },
    #[error("size {size} exceeds the configured bound {limit}")]
    SizeBound { size: usize, limit: usize },
    #[error("database must hold at least one entry")]
    EmptyDatabase,
    #[error("index {index} out of range 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("malformed input: {0}")]
    Malformed(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
