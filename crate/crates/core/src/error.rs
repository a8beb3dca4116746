use thiserror::Error;

/// Errors raised by the simulator and its analysis drivers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpcError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {left} qubits vs {right} qubits")]
    DimensionMismatch { left: usize, right: usize },

    #[error("qubit index {index} out of range for a {qubits}-qubit state")]
    QubitOutOfRange { index: usize, qubits: usize },

    #[error("joint state of {requested} qubits exceeds the {max}-qubit cap")]
    TooManyQubits { requested: usize, max: usize },

    #[error("matrix is not unitary (max deviation from identity {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("state is not normalized (norm squared {norm_sqr})")]
    NotNormalized { norm_sqr: f64 },
}

pub type Result<T> = std::result::Result<T, QpcError>;

pub(crate) fn invalid(msg: impl Into<String>) -> QpcError {
    QpcError::InvalidArgument(msg.into())
}
