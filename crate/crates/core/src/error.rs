//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // ---- graph loading / queries ----
    #[error("malformed row at line {line}: {msg}")]
    MalformedRow { line: usize, msg: String },
    #[error("unknown entity '{name}' referenced at line {line} (no type row)")]
    UnknownEntity { name: String, line: usize },
    #[error("duplicate triple at line {line}: ({head}, {relation}, {tail})")]
    DuplicateTriple {
        line: usize,
        head: String,
        relation: String,
        tail: String,
    },
    #[error("duplicate type assignment for entity '{name}' at line {line}")]
    DuplicateTypeAssignment { name: String, line: usize },
    #[error("empty graph: no triples in input")]
    EmptyGraph,
    #[error("unknown entity type '{0}'")]
    UnknownType(String),
    #[error("no entities of type '{0}'")]
    EmptyType(String),
    #[error("invalid {kind} id {id} (count {count})")]
    InvalidId {
        kind: &'static str,
        id: usize,
        count: usize,
    },

    // ---- tensor / autodiff ----
    #[error("shape mismatch in {op}: lhs {lhs_rows}x{lhs_cols}, rhs {rhs_rows}x{rhs_cols}")]
    ShapeMismatch {
        op: &'static str,
        lhs_rows: usize,
        lhs_cols: usize,
        rhs_rows: usize,
        rhs_cols: usize,
    },
    #[error("{op} expects {expected}, got {rows}x{cols}")]
    BadShape {
        op: &'static str,
        expected: &'static str,
        rows: usize,
        cols: usize,
    },
    #[error("log of non-positive value {0} (use log_guarded for clamped semantics)")]
    LogNonPositive(f64),
    #[error("cannot normalize near-zero vector (norm {0:e})")]
    NearZeroNorm(f64),
    #[error("backward called on a consumed tape")]
    TapeConsumed,
    #[error("backward requires a scalar loss, got {rows}x{cols}")]
    NonScalarLoss { rows: usize, cols: usize },
    #[error("invalid data length {len} for shape {rows}x{cols}")]
    BadDataLength { len: usize, rows: usize, cols: usize },

    // ---- embeddings / files ----
    #[error("bad magic in {path}: expected {expected}")]
    BadMagic { path: String, expected: &'static str },
    #[error("truncated payload in {path}: {msg}")]
    Truncated { path: String, msg: String },
    #[error("dimension mismatch in {path}: header says {header}, record {record} has {found}")]
    DimMismatch {
        path: String,
        header: usize,
        record: usize,
        found: usize,
    },
    #[error("missing embedding for key {key} ({kind})")]
    MissingEmbedding { key: u32, kind: &'static str },
    #[error("empty token sequence")]
    EmptyTokens,
    #[error("checksum mismatch in {0}: file is corrupt")]
    ChecksumMismatch(String),
    #[error("unsupported version {found} in {path} (expected {expected})")]
    VersionMismatch {
        path: String,
        found: u32,
        expected: u32,
    },

    // ---- matching / sampling ----
    #[error("K={k} out of range for {n} facts")]
    KOutOfRange { k: usize, n: usize },
    #[error("K + M = {km} exceeds fact count {n}")]
    CapacityExceeded { km: usize, n: usize },
    #[error("entity type '{0}' has fewer than 2 members; cannot perturb")]
    TypeClassTooSmall(String),
    #[error("resample budget exhausted after {0} attempts generating a negative")]
    ResampleBudgetExhausted(usize),
    #[error(
        "no candidate triples at hop distance >= {h} from the positive set \
         (max achievable distance {max_achievable}, {needed} needed, {available} available)"
    )]
    NoFarCandidates {
        h: u32,
        max_achievable: u32,
        needed: usize,
        available: usize,
    },

    // ---- training / numeric ----
    #[error("non-finite gradient in parameter '{0}'; aborting step")]
    NonFiniteGradient(String),
    #[error("non-finite loss for claim {claim_id} at epoch {epoch}")]
    NonFiniteLoss { claim_id: u32, epoch: usize },

    // ---- probe / evaluation ----
    #[error("probe training needs at least 2 classes, got {0}")]
    SingleClass(usize),
    #[error("claim {0} is labeled non-NEI but carries no gold evidence")]
    MissingEvidence(u32),
    #[error("gold triple {0} absent from the candidate set")]
    GoldAbsent(u32),

    // ---- corpus generation ----
    #[error("infeasible corpus spec: {0}")]
    InfeasibleSpec(String),
    #[error("invalid claim record at line {line}: {msg}")]
    BadClaimRecord { line: usize, msg: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of numeric origin (NaN/Inf aborts) as opposed to bad data.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonFiniteGradient(_) | Error::NonFiniteLoss { .. }
        )
    }
}
