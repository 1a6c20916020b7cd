use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("mode {0} is not in the registry")]
    UnknownMode(String),
    #[error("matrix is not unitary (deviation {0:.3e})")]
    NotUnitary(f64),
    #[error("mode slots must be distinct")]
    CoincidentModes,
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },
    #[error("state has support outside the encoded subspace")]
    OutsideEncoding,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{0} qubits exceeds the dense limit")]
    TooManyQubits(usize),
    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),
    #[error("operator is not Hermitian")]
    NotHermitian,
    #[error("infeasible configuration: {0}")]
    Infeasible(String),
    #[error("no success within {0} attempts")]
    AttemptsExhausted(u64),
    #[error("problem size beyond exhaustive regime: {0}")]
    TooLarge(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParam { name, reason: reason.into() }
}
