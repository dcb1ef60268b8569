use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid UTF-8 at byte offset {offset}")]
    Decode { offset: usize },

    #[error("sentence is empty after normalization")]
    EmptySentence,

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("vocabulary size {requested} is too small, minimum feasible size is {minimum}")]
    VocabTooSmall { requested: usize, minimum: usize },

    #[error("embedding dimension {0} is below the minimum of 8")]
    DimensionTooSmall(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("vocabulary and corpus do not match: {0}")]
    VocabMismatch(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("SVD failed at iteration {iteration}")]
    Svd { iteration: usize },

    #[error("mapping collapsed: induced dictionary is empty at iteration {iteration}")]
    MappingCollapsed { iteration: usize },

    #[error("bitext line counts differ: {left} vs {right} (first unmatched line {first_unmatched})")]
    LineCountMismatch {
        left: usize,
        right: usize,
        first_unmatched: usize,
    },

    #[error("requested {requested} anchors but only {available} mutual pairs exist")]
    InsufficientAnchors { requested: usize, available: usize },

    #[error("merged size n={n} with m={m} needs {needed} shared entries but only {available} are available; smallest feasible n is {min_n}")]
    InfeasibleMerge {
        m: usize,
        n: usize,
        needed: usize,
        available: usize,
        min_n: usize,
    },

    #[error("invalid merge sizes: {0}")]
    InvalidMergeSizes(String),

    #[error("K={k} must be smaller than the number of candidates ({candidates})")]
    NeighbourhoodTooLarge { k: usize, candidates: usize },

    #[error("no evaluable test pairs")]
    NothingToEvaluate,

    #[error("missing similarity matrix for share+align layout")]
    MissingSimilarity,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
