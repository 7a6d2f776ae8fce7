use thiserror::Error;

use crate::hypergraph::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} index {index} out of range (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid hypergraph: {0}")]
    InvalidHypergraph(#[from] Violation),

    #[error("invalid adjacency matrix: {0}")]
    InvalidAdjacency(String),

    #[error("not a simplex point: {0}")]
    NotOnSimplex(String),

    /// pᵀMp = 0, so the replicator update has no denominator.
    #[error("degenerate start: density of the start vector is zero")]
    DegenerateStart,

    #[error("instance too large for exhaustive enumeration: {size} > {max}")]
    TooLarge { size: usize, max: usize },

    #[error("empty hyperedge set")]
    EmptySet,

    #[error("hyperedge {0} is not a member of the subset")]
    NotInSubset(usize),

    #[error("subset of size {size} exceeds the exact recursion cap {cap}")]
    SubsetTooLarge { size: usize, cap: usize },

    #[error("the vector is already a certified mode; no ascent direction exists")]
    AlreadyMode,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty hypergraph: {0}")]
    EmptyHypergraph(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
