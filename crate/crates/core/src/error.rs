use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad class of an [`Error`], used by front ends to pick exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input: malformed numbers, invalid tables, out-of-range values.
    Input,
    /// The data are inconsistent with the model.
    Verdict,
    /// A problem exceeded a configured size cap.
    Capacity,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid design: {0}")]
    InvalidConfig(String),

    #[error("{0}")]
    Domain(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("design mismatch: expected {expected}, found {found}")]
    ConfigMismatch { expected: String, found: String },

    #[error("{what} needs {required} entries, above the cap of {cap}")]
    Capacity {
        what: &'static str,
        required: u128,
        cap: u128,
    },

    /// A witness construction step would need negative mass.
    #[error("construction needs negative mass {mass} at {step}")]
    NegativeMass { step: String, mass: String },

    #[error("tie between utilities; resample")]
    Tie,

    #[error("{0}")]
    Sampling(String),

    #[error("instrument value {0} has no observations")]
    EmptyArm(usize),

    #[error("row {row}: {message}")]
    Row { row: usize, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Capacity { .. } => ErrorKind::Capacity,
            Error::NegativeMass { .. } => ErrorKind::Verdict,
            _ => ErrorKind::Input,
        }
    }
}
