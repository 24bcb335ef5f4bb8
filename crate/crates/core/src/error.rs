use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("expression parse error at column {column}: {message}")]
    Parse { column: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("derivative of order (t={t}, x={x}) requested from `{field}`, which declares at most (t={max_t}, x={max_x})")]
    DerivativeOrder {
        field: String,
        t: usize,
        x: usize,
        max_t: usize,
        max_x: usize,
    },

    #[error("coefficient set is not constant")]
    NotConstant,

    #[error("controllability condition unsatisfied: {0}")]
    ConditionUnsatisfied(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {residual:e})")]
    CgNotConverged { iterations: usize, residual: f64 },

    #[error("unsupported stencil order (t={t}, x={x})")]
    UnsupportedOrder { t: usize, x: usize },

    #[error("pipeline check failed: {0}")]
    Pipeline(String),

    #[error("target unreachable: best squared error {best:e} > epsilon {epsilon:e} at k = {k:e}")]
    Unreachable { best: f64, epsilon: f64, k: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Parse { .. }
            | Error::InvalidArgument(_)
            | Error::DerivativeOrder { .. }
            | Error::Io(_) => 1,
            Error::ConditionUnsatisfied(_) | Error::NotConstant => 2,
            _ => 3,
        }
    }
}
