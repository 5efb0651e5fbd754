use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("infeasible: {required} assignments requested but total capacity is {capacity}")]
    Infeasible { required: usize, capacity: usize },

    #[error("dimension mismatch: expected {expected_rows}x{expected_cols}, found {rows}x{cols}")]
    DimensionMismatch {
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("infeasible matching: {0}")]
    InfeasibleMatching(String),

    #[error("brute force limited to n <= {max_n} and k <= {max_k}, got n={n}, k={k}")]
    SizeLimit {
        n: usize,
        k: usize,
        max_n: usize,
        max_k: usize,
    },

    #[error("instance carries no success probabilities")]
    MissingSuccessProb,

    #[error("no Beta parameters for feature {x}, slot {r}")]
    MissingTableEntry { x: usize, r: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no human record for task {task_id:?} with b={b}")]
    NoRecord { task_id: String, b: usize },

    #[error("no records to analyze")]
    EmptyRecords,

    #[error("dataset line {line}: {message}")]
    Dataset { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("arm b={0} is not part of the arm set")]
    UnknownArm(usize),

    #[error("sampled reward mode requires realized outcomes")]
    MissingOutcomes,

    #[error("matchings overlap on individual {0}")]
    OverlappingMatchings(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Errors caused by bad input rather than by a failure while running.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::Csv(_))
    }
}
