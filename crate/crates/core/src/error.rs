use std::path::PathBuf;

/// Errors produced by the measurement, aggregation and I/O routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("bad magic: expected \"LRDT\", found {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported LRDT version {0}")]
    UnsupportedVersion(u16),
    #[error("unsupported LRDT dtype {0}")]
    UnsupportedDtype(u8),
    #[error("truncated payload: expected {expected} values, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("non-finite value at layer {layer}, row {row}, column {col}")]
    NonFinite { layer: usize, row: usize, col: usize },
    #[error("invalid sequence: {0}")]
    InvalidSequence(String),
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("rank {rank} exceeds min(N, d) = {max}")]
    RankTooLarge { rank: usize, max: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("sequence too shallow: {0}")]
    TooShallow(String),
    #[error("k = {k} must satisfy 1 <= k < N = {n}")]
    KTooLarge { k: usize, n: usize },
    #[error("jaccard of two empty sets is undefined")]
    BothEmpty,
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least two grid points, found {0}")]
    TooFewPoints(usize),
    #[error("model {0:?} has no family mapping")]
    UnmappedModel(String),
    #[error("task {0:?} has no task-type mapping")]
    UnmappedTask(String),
    #[error("incompatible series: {0}")]
    IncompatibleSeries(String),
    #[error("no prunable layers for L = {0} (need L >= 7)")]
    NoPrunableLayers(usize),
    #[error("relative change undefined for a zero baseline score")]
    ZeroBaseline,
    #[error("constant input: {0}")]
    ConstantInput(&'static str),
    #[error("missing cell: {0}")]
    MissingCell(String),
    #[error("{what}: {source}")]
    InTask {
        what: String,
        #[source]
        source: Box<Error>,
    },
    #[error("{path}: row {row}: {msg}")]
    Schema { path: String, row: usize, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
