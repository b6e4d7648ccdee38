use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DyadError {
    #[error("missing dyad ({0}, {1})")]
    MissingDyad(String, String),
    #[error("duplicate dyad ({0}, {1})")]
    DuplicateDyad(String, String),
    #[error("self link at node {0}")]
    SelfLink(String),
    #[error("record {record}: expected {expected} covariates, found {found}")]
    CovariateLength { record: usize, expected: usize, found: usize },
    #[error("binary outcome expected, row {row} has y = {value}")]
    NonBinaryOutcome { row: usize, value: f64 },
    #[error("a dyadic sample needs at least 3 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("empty dyad set")]
    EmptyDyadSet,
    #[error("cannot split {n_nodes} nodes into {k} folds of at least 2 nodes")]
    FoldTooSmall { n_nodes: usize, k: usize },
    #[error("fold index {k} out of range for {folds} folds")]
    FoldIndex { k: usize, folds: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("Jacobian singular (|det| = {det:e})")]
    SingularJacobian { det: f64 },
    #[error("no root of the stacked score; best epsilon-solution theta = {theta}, residual = {residual:e}")]
    RootNotFound { theta: f64, residual: f64 },
    #[error("all {attempted} repetitions failed; last error: {last}")]
    AllFailed { attempted: usize, last: String },
}

pub type Result<T, E = DyadError> = std::result::Result<T, E>;
