use thiserror::Error;

/// Failure modes shared by every operation in the crate.
///
/// The split matters to callers: `InvalidParameter`, `InvalidInput`,
/// `Precondition`, `NotApplicable`, and `Parse` are refusals (the request
/// itself is bad), while `Internal` means a computation that should have
/// succeeded did not.
#[derive(Debug, Error)]
pub enum Error {
    /// A scalar or structural parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Input data (fields, index sets, matrices) is malformed for the operation.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A stated precondition does not hold for the given data.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The operation is meaningless on this space (e.g. no edge graph).
    #[error("not applicable: {0}")]
    NotApplicable(String),

    /// A structured-text file could not be parsed; carries a location diagnostic.
    #[error("parse failure: {0}")]
    Parse(String),

    /// File I/O failed.
    #[error("io failure: {0}")]
    Io(#[from] std::io::Error),

    /// An invariant the implementation itself guarantees was broken.
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    /// True for refusal-type errors: the request was rejected, nothing ran.
    pub fn is_refusal(&self) -> bool {
        !matches!(self, Error::Internal(_) | Error::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
