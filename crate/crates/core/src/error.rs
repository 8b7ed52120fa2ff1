use thiserror::Error;

/// Errors raised by the state kernel, measures, measurements and protocols.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("amplitude vector has length {len}, expected 2^{n_qubits}")]
    DimensionMismatch { n_qubits: usize, len: usize },
    #[error("state is not normalized (norm^2 = {norm_sqr})")]
    NotNormalized { norm_sqr: f64 },
    #[error("qubit count {0} outside the supported range 1..={max}", max = crate::statekit::MAX_QUBITS)]
    UnsupportedQubitCount(usize),
    #[error("invalid qubit index {index} for a {n_qubits}-qubit state")]
    InvalidQubit { index: usize, n_qubits: usize },
    #[error("qubit index {0} listed twice")]
    DuplicateQubit(usize),
    #[error("qubit subset must be a nonempty proper subset")]
    InvalidSubset,
    #[error("matrix is not a valid density matrix: {0}")]
    InvalidDensityMatrix(String),
    #[error("operator is not positive semidefinite (min eigenvalue {0})")]
    NotPositive(f64),
    #[error("parameter {name} = {value} outside admissible range {range}")]
    ParameterOutOfRange { name: &'static str, value: f64, range: String },
    #[error("measurement outcome {outcome} has probability {probability}, below the null threshold")]
    NullOutcome { outcome: usize, probability: f64 },
    #[error("{0}")]
    Unsupported(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
