use thiserror::Error;

/// Errors produced by the factorization / inversion pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed matrix market file {path}: {reason} (line {line})")]
    MatrixMarket {
        path: String,
        reason: String,
        line: usize,
    },

    #[error("entry ({i},{j}) out of range for a {nrows}x{ncols} matrix")]
    IndexOutOfRange {
        i: usize,
        j: usize,
        nrows: usize,
        ncols: usize,
    },

    #[error("pattern-only matrix market files carry no values and are rejected")]
    PatternOnly,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid permutation: {reason}")]
    InvalidPermutation { reason: String },

    #[error("shift pattern violation: S has an entry at ({i},{j}) outside the pattern of H")]
    ShiftPattern { i: usize, j: usize },

    #[error(
        "pivot breakdown in supernode {supernode} at local column {local_col} \
         (global column {global_col}): |pivot| = {magnitude:.3e} below threshold \
         {threshold:.3e}; consider factoring a shifted matrix with a complex shift"
    )]
    PivotBreakdown {
        supernode: usize,
        local_col: usize,
        global_col: usize,
        magnitude: f64,
        threshold: f64,
    },

    #[error("factor is already normalized")]
    AlreadyNormalized,

    #[error("operation requires a normalized factor")]
    NotNormalized,

    #[error("entry ({i},{j}) lies outside the computed selected-inverse pattern")]
    NotComputed { i: usize, j: usize },

    #[error("trace product pattern violation: B has an entry at ({i},{j}) not computed in the selected inverse")]
    TracePattern { i: usize, j: usize },

    #[error("pole {pole}: {source}")]
    Pole {
        pole: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(
        "no progress on rank {rank} within {timeout_ms} ms while waiting for {waiting}; \
         pending tags: [{pending}]"
    )]
    Deadlock {
        rank: usize,
        timeout_ms: u64,
        waiting: String,
        pending: String,
    },

    #[error("worker rank {rank} panicked")]
    WorkerPanic { rank: usize },

    #[error("singular matrix: dense oracle pivot {col} is zero to working precision")]
    SingularOracle { col: usize },

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
