//! Error taxonomy shared by every module. Exit-code policy for the CLI:
//! configuration problems map to exit 1, numerical/runtime problems to exit 2.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad user input: unknown keys, invalid ranges, malformed files.
    #[error("configuration error: {0}")]
    Config(String),

    /// An argument violates an operation's precondition.
    #[error("invalid argument: {0}")]
    Invalid(String),

    /// Operator/space dimensions do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A solver or integrator failed (singular factorization, step underflow,
    /// non-convergent truncation scan).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A correlation ratio was requested on a state with no photons to correlate.
    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    /// A classification was requested from a record that lacks the needed traces.
    #[error("incomplete record: {0}")]
    IncompleteRecord(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// CLI exit code for this error (0 is success and never produced here).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Invalid(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
