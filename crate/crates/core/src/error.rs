use thiserror::Error;

/// Errors produced by the count-model library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv row {row}, column {column}: {message}")]
    Csv {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("empty data: {0}")]
    EmptyData(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dispersion undefined: mean is zero")]
    UndefinedDispersion,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("divergent series: {0}")]
    Divergent(String),

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("log-normal mixture requires overdispersion: column {column} has variance {variance} <= mean {mean}")]
    Underdispersed {
        column: String,
        mean: f64,
        variance: f64,
    },

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
