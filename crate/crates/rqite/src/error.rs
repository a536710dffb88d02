use thiserror::Error;

/// Errors raised by the library. Each variant maps to a stable code string
/// used in CLI error objects.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: expected {expected} qubits, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{what} cap exceeded: {actual} > {limit}")]
    CapExceeded {
        what: &'static str,
        limit: usize,
        actual: usize,
    },
    #[error("beta out of range: {0}")]
    BetaOutOfRange(String),
    #[error("vanishing constant term |c0| = {0:e}")]
    DegenerateConstant(f64),
    #[error("truncation order target not met: bound {bound:e} > {target:e} at M = {order}")]
    TruncationNotMet { order: usize, bound: f64, target: f64 },
    #[error("scan exhausted [{ea}, {eb}] without termination")]
    ScanExhausted { ea: f64, eb: f64 },
    #[error("backend failed at x = {x}: {source}")]
    Backend {
        x: f64,
        #[source]
        source: Box<Error>,
    },
    #[error("zero-free certificate refused: {0}")]
    CertificateRefused(String),
    #[error("eigendecomposition failed")]
    Eigen,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse_error",
            Error::InvalidInput(_) => "invalid_input",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::CapExceeded { .. } => "cap_exceeded",
            Error::BetaOutOfRange(_) => "beta_out_of_range",
            Error::DegenerateConstant(_) => "degenerate_constant",
            Error::TruncationNotMet { .. } => "truncation_not_met",
            Error::ScanExhausted { .. } => "scan_exhausted",
            Error::Backend { source, .. } => source.code(),
            Error::CertificateRefused(_) => "certificate_refused",
            Error::Eigen => "eigen_failure",
            Error::Io(_) => "io_error",
            Error::Json(_) => "json_error",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
