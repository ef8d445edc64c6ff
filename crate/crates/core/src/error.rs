use thiserror::Error;

/// Errors raised by the engine, the FPCA pipeline and the ingestion layer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite reading at series index {series} (time index {time})")]
    NonFinite { series: usize, time: usize },

    #[error("length mismatch: expected {expected} values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid operation: {0}")]
    InvalidOperation(String),

    #[error("unknown series ids: {}", .0.join(", "))]
    UnknownSeries(Vec<String>),

    #[error("duplicate series id '{0}'")]
    DuplicateSeries(String),

    #[error("singular smoothing system: {0}; try a larger lambda or fewer basis functions")]
    Singular(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// True for problems caused by the input data rather than by configuration or state.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. }
                | Error::LengthMismatch { .. }
                | Error::UnknownSeries(_)
                | Error::DuplicateSeries(_)
                | Error::Parse { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
