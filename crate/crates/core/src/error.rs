use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{what}: expected length {expected}, found {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("qubit index {index} out of range for a {n_qubits}-qubit register")]
    SupportOutOfRange { index: usize, n_qubits: usize },

    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("state is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },

    #[error("invalid Pauli label {0:?}")]
    InvalidPauli(char),

    #[error("the all-identity Pauli string is not a valid generator")]
    IdentityGenerator,

    #[error("residual imaginary part {0:e} exceeds tolerance")]
    ImaginaryResidual(f64),

    #[error("invalid shape: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("sample set is empty")]
    EmptySample,

    #[error("label {label} out of range for {n_classes} classes")]
    LabelOutOfRange { label: usize, n_classes: usize },

    #[error("AUC needs at least one positive and one negative sample")]
    SingleClass,

    #[error("non-finite {what} at epoch {epoch}, batch {batch}")]
    Divergence {
        what: &'static str,
        epoch: usize,
        batch: usize,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
