use thiserror::Error;

/// Errors produced by parsing, configuration checks and the test machinery.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input data, reported with a row/column location.
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    /// An item id that does not exist in the judgement matrix.
    #[error("unknown item id `{0}`")]
    UnknownItem(String),

    /// Invalid parameter or option combination.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Full enumeration would visit more arrangements than the budget allows.
    #[error("exact enumeration needs {arrangements} arrangements, cutoff is {cutoff}")]
    CutoffExceeded { arrangements: u128, cutoff: u64 },

    /// An agreement matrix with no rows.
    #[error("agreement matrix has no rows")]
    EmptyMatrix,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
