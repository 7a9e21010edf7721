use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain mismatch: expected {expected}, found {found}")]
    DomainMismatch { expected: String, found: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("duplicate point {0}")]
    DuplicatePoint(String),

    #[error("matrix is not Hermitian (relative asymmetry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eig:.3e})")]
    NotPositive { min_eig: f64 },

    #[error("operator-valued kernels cannot be multiplied (m = {left} and m = {right})")]
    OperatorTimesOperator { left: usize, right: usize },

    #[error("matrix has non-finite entries")]
    NonFinite,

    #[error("eigensolver did not converge")]
    EigenFailure,

    #[error("linear solve failed (condition estimate {condition:.3e})")]
    SolveFailure { condition: f64 },

    #[error("negative squared norm {0:.3e}")]
    NegativeNorm(f64),

    #[error("no eigenvalue above the retention threshold {0:.3e}")]
    EmptySpectrum(f64),

    #[error("index {index} out of bounds for {len} support points")]
    IndexOutOfBounds { index: usize, len: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("syntax error at line {line}, column {col}: {message}")]
    Syntax { line: usize, col: usize, message: String },

    #[error("unknown function `{0}`")]
    UnknownFunction(String),

    #[error("bad argument: {0}")]
    BadArgument(String),

    #[error("mixed domains: {left} and {right}")]
    MixedDomains { left: String, right: String },

    #[error("{path}: {message}")]
    File { path: String, message: String },
}

impl Error {
    pub(crate) fn domain(expected: impl ToString, found: impl ToString) -> Self {
        Error::DomainMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    /// Whether the failure is numerical rather than a malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotHermitian { .. }
                | Error::NotPositive { .. }
                | Error::NonFinite
                | Error::EigenFailure
                | Error::SolveFailure { .. }
                | Error::NegativeNorm(_)
                | Error::EmptySpectrum(_)
        )
    }
}
