use thiserror::Error;

/// Errors raised by the toolkit.
///
/// The variants fall in two groups that the CLI maps to distinct exit codes:
/// input/configuration problems, and numerical failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("zero scale in column '{column}': more than half of the values are identical")]
    ZeroScale { column: String },

    #[error("zero variance after transformation in column '{column}'")]
    ZeroVariance { column: String },

    #[error("singular scatter matrix (condition number {condition:.3e})")]
    Singular { condition: f64 },

    #[error("solver failed: {message} (residual {residual:.3e})")]
    SolverFailure { message: String, residual: f64 },

    #[error("I/O error on '{path}': {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::ZeroScale { .. }
                | Error::ZeroVariance { .. }
                | Error::Singular { .. }
                | Error::SolverFailure { .. }
        )
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
