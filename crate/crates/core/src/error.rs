use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("malformed record: {0}")]
    Malformed(String),
    #[error("missing required field `{0}`")]
    MissingField(String),
    #[error("invalid field `{field}`: {reason}")]
    InvalidField { field: String, reason: String },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("duplicate interaction id `{0}`")]
    DuplicateId(String),
    #[error("vector `{id}` has dimension {found}, expected {expected}")]
    DimensionMismatch {
        id: String,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: {source}")]
    AtLine {
        line: usize,
        #[source]
        source: Box<ModelError>,
    },
}

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("empty interaction pool")]
    EmptyPool,
    #[error("no vector for interaction `{0}`")]
    MissingVector(String),
    #[error("bad magic number, not a vector file")]
    BadMagic,
    #[error("vector file truncated while reading {0}")]
    Truncated(String),
    #[error("dimension disagreement: {0}")]
    Dimension(String),
    #[error("invalid embedder configuration: {0}")]
    Config(String),
    #[error("interaction id `{0}` longer than 65535 bytes")]
    IdTooLong(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Error)]
pub enum CoresetError {
    #[error("budget k={k} out of range for pool of {n}")]
    BudgetOutOfRange { k: usize, n: usize },
    #[error("every vector in the pool has zero norm")]
    AllZero,
    #[error("weight index {index} out of range for pool of {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("negative or non-finite weight {weight} at index {index}")]
    BadWeight { index: usize, weight: f64 },
    #[error("instance too large for exhaustive search: {0}")]
    TooLarge(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum SeverityError {
    #[error("no judgment supplied for node `{0}`")]
    MissingJudgment(String),
    #[error("answer {option:?} is not an option of node `{node_id}`")]
    InvalidOption { node_id: String, option: String },
    #[error("node `{0}` does not exist")]
    UnknownNode(String),
    #[error("walk did not terminate at a leaf (cycle through `{0}`)")]
    NonTerminating(String),
    #[error("no annotation records supplied")]
    NoRecords,
    #[error("records mix tree versions {0:?}")]
    MixedVersions(Vec<String>),
    #[error("records mix interactions {0:?}")]
    MixedInteractions(Vec<String>),
    #[error("decision tree is invalid: {0}")]
    InvalidTree(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Error)]
pub enum EstimationError {
    #[error("no annotation for support member `{0}`")]
    MissingAnnotation(String),
    #[error("support index {0} has no interaction id")]
    UnmappedIndex(usize),
    #[error("total weight of the support is zero")]
    ZeroWeight,
    #[error("label sets differ between estimate and truth")]
    LabelMismatch,
    #[error("budget k={k} larger than subpool of {n}")]
    BudgetTooLarge { k: usize, n: usize },
    #[error("pool item `{0}` has no gold label")]
    Unlabeled(String),
    #[error("k={0} not present in the coreset curve")]
    UnknownBudget(usize),
    #[error("target rmse {0} is below every point of the uniform curve")]
    NotReachable(f64),
    #[error("invalid experiment setup: {0}")]
    Setup(String),
    #[error(transparent)]
    Coreset(#[from] CoresetError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum BenchmarkError {
    #[error("candidate `{id}` already present in manifest {manifest}")]
    AlreadyPresent { id: String, manifest: String },
    #[error("duplicate candidate `{0}`")]
    DuplicateCandidate(String),
    #[error("holdout fraction {0} outside (0, 1)")]
    BadFraction(f64),
    #[error("ids overlap with prior manifest: {0:?}")]
    Overlap(Vec<String>),
    #[error("split mismatch: manifest is {manifest}, delta is {delta}")]
    SplitMismatch { manifest: String, delta: String },
    #[error("no {side} response for member `{id}`")]
    MissingResponse { side: &'static str, id: String },
    #[error("`{0}` is not a member of the manifest")]
    NotMember(String),
    #[error("checksum mismatch: stored {stored}, computed {computed}")]
    Checksum { stored: String, computed: String },
    #[error("manifest invariant violated: {0}")]
    Invalid(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
}
