use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("operator is not Hermitian (max |H - H^dagger| = {residual:e})")]
    NonHermitian { residual: f64 },

    #[error("Jordan-Wigner expansion left an imaginary coefficient {imag:e} on {string}")]
    ImaginaryResidue { string: String, imag: f64 },

    #[error("empty valid subspace: {0}")]
    EmptySubspace(String),

    #[error(
        "constraint {kind} is not compatible with the running subspace (residual {residual:e})"
    )]
    IncompatibleConstraint { kind: String, residual: f64 },

    #[error("state lies outside the valid subspace (residual {residual:e})")]
    OutsideSubspace { residual: f64 },

    #[error("reduced Hamiltonian is not symmetric (max asymmetry {residual:e})")]
    Asymmetric { residual: f64 },

    #[error("dimension {dim} exceeds the dense limit {limit}")]
    DimensionTooLarge { dim: usize, limit: usize },

    #[error("coupling graph does not connect active qubits {active:?} from control {control}")]
    Disconnected { control: usize, active: Vec<usize> },

    #[error("missing probability table for {0}")]
    MissingTable(String),

    #[error("probability table for {name} has length {got}, expected {expected}")]
    TableLength {
        name: String,
        got: usize,
        expected: usize,
    },

    #[error("ansatz expects {expected} parameters, got {got}")]
    ParameterCount { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::Invalid(message.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
