use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {rows} rows, row {row} has {cols} entries")]
    NonSquare { rows: usize, row: usize, cols: usize },

    #[error("empty matrix or state block")]
    Empty,

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("negative entry {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("row {row} sums to {sum}, outside tolerance of 1")]
    RowSumOutOfTolerance { row: usize, sum: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("gamma must lie in (0, 1), got {0}")]
    GammaOutOfRange(f64),

    #[error("graph is not connected")]
    DisconnectedGraph,

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("base matrix {index} is not doubly stochastic (column deviation {deviation})")]
    BaseNotDoublyStochastic { index: usize, deviation: f64 },

    #[error("failure probability must lie in [0, 1), got {0}")]
    POutOfRange(f64),

    #[error("chain exposes neither an analytic conditional law nor conditional resampling")]
    ConditionalLawUnavailable,

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("trajectory is missing the {0} log")]
    MissingLogs(&'static str),

    #[error("huber delta must be positive, got {0}")]
    DeltaNonpositive(f64),

    #[error("max-affine objective needs at least one piece with matching slopes and offsets")]
    EmptyPieces,

    #[error("step exponent beta must lie in (1/2, 1], got {0}")]
    BetaOutOfRange(f64),

    #[error("step scale K must be positive, got {0}")]
    KNonpositive(f64),

    #[error("invalid step schedule: {0}")]
    InvalidSchedule(String),

    #[error("grid minimum lies on the search-box boundary; enlarge the box")]
    OptimizerOnBoundary,

    #[error("mean diameter is identically {0}; decay fit undefined")]
    AllPathsDegenerate(f64),

    #[error("window order violated: {0}")]
    WindowOrderViolation(String),

    #[error("series too short: need at least {needed}, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("series never drops to or below lambda = {0}")]
    NoCrossings(f64),

    #[error("theta must lie in [0, 1), got {0}")]
    ThetaOutOfRange(f64),

    #[error("need at least {needed} runs, got {got}")]
    TooFewRuns { needed: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dims(expected: impl ToString, found: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
