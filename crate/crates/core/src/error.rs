//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("variable subset is empty")]
    EmptySubset,

    #[error("variable index {index} out of range for {num_vars} variables")]
    IndexOutOfRange { index: usize, num_vars: usize },

    #[error("variable subsets overlap (index {index} appears in more than one)")]
    OverlappingSubsets { index: usize },

    #[error("product space has {cells} cells, exceeding the {cap}-cell cap")]
    SpaceTooLarge { cells: usize, cap: usize },

    #[error("need at least {needed} variables, found {found}")]
    TooFewVariables { needed: usize, found: usize },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("absolute continuity violated: q = 0 but p = {p} at cell {cell}")]
    AbsoluteContinuity { cell: usize, p: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },

    #[error("head is not decomposable per modality (required by this loss)")]
    HeadNotDecomposable,

    #[error("head is not linear (required by the factored loss)")]
    HeadNotLinear,

    #[error("batch size {size} exceeds the cap of {cap} for the full pairwise loss")]
    BatchTooLarge { size: usize, cap: usize },

    #[error("negative sample set is empty")]
    EmptyNegativeSet,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite loss at iteration {iter}")]
    NonFiniteLoss { iter: usize },

    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLossAtEpoch { epoch: usize },

    #[error("strategy {strategy} is incompatible with head {head}")]
    IncompatibleStrategy { strategy: String, head: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
