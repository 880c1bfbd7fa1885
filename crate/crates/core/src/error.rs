use thiserror::Error;

/// Errors produced anywhere in the triangulation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("simplex is degenerate (zero orientation)")]
    DegenerateSimplex,
    #[error("all input points are affinely dependent")]
    DegenerateInput,
    #[error("point {0} duplicates an already inserted point")]
    DuplicatePoint(u32),
    #[error("invalid point set: {0}")]
    InvalidPoints(String),
    #[error("validation oracle limited to {limit} points, got {n}")]
    OracleLimitExceeded { n: usize, limit: usize },
    #[error("cannot split {vertices} vertices into {k} non-empty parts")]
    InfeasibleBalance { vertices: usize, k: usize },
    #[error("k = {0} is not a power of two")]
    KNotPowerOfTwo(usize),
    #[error("simplex {0:?} would be inserted twice during merge")]
    InconsistentMerge(Vec<u32>),
    #[error("finite facet {0:?} has no partner after neighbor repair")]
    DanglingFacet(Vec<u32>),
    #[error("coefficient of variation needs at least two parts")]
    UndefinedForSinglePart,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
