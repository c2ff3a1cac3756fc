use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid Pauli label {label:?}: {reason}")]
    PauliLabel { label: String, reason: String },

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("Hamiltonian has no terms")]
    EmptyHamiltonian,

    #[error("duplicate term {pauli} (lines/terms {first} and {second})")]
    DuplicateTerm { pauli: String, first: usize, second: usize },

    #[error("term {pauli} has a zero coefficient")]
    ZeroCoefficient { pauli: String },

    #[error("identity term is not allowed in a Hamiltonian")]
    IdentityTerm,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("terms {a} and {b} do not commute")]
    NotCommuting { a: usize, b: usize },

    #[error("diagonalizer for group {group} leaves term {term} off-diagonal")]
    InvalidDiagonalizer { group: usize, term: usize },

    #[error("no covariance available for terms {i} and {k}")]
    MissingCovariance { i: usize, k: usize },

    #[error("no samples for group {group} but weight is non-zero")]
    MissingSamples { group: usize },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
        last_iterate: Vec<f64>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for numerical failures as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonConvergence { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
