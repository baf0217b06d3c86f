use thiserror::Error;

/// Crate-wide error type. The CLI maps variants onto exit codes:
/// config errors -> 2, numerical failures -> 3, I/O errors -> 4.
#[derive(Debug, Error)]
pub enum Error {
    #[error("CONFIG_INVALID: {0}")]
    Config(String),

    #[error("NUMERICAL_FAILURE: {0}")]
    Numerics(String),

    #[error("IO_ERROR: {0}")]
    Io(String),

    /// The query point is outside the tubular neighbourhood where the
    /// transversality equation has a well-conditioned root.
    #[error("NUMERICAL_FAILURE: point outside the tubular neighbourhood of the curve")]
    OutsideTube,

    /// |X_s| vanished somewhere on the curve.
    #[error("NUMERICAL_FAILURE: degenerate curve parametrization (|X_s| ~ 0)")]
    DegenerateTangent,
}

impl Error {
    /// Machine-parsable error code, the first token of the display form.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Config(_) => "CONFIG_INVALID",
            Error::Io(_) => "IO_ERROR",
            _ => "NUMERICAL_FAILURE",
        }
    }

    /// Process exit status associated with this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io(_) => 4,
            _ => 3,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
