use std::path::PathBuf;

/// Errors raised by the solver library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("iterative solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    ConvergenceFailure { iterations: usize, residual: f64 },

    #[error("Picard iteration did not converge in {iterations} iterations (last update {last_update:.3e}, threshold {threshold:.3e})")]
    NonlinearDivergence {
        iterations: usize,
        last_update: f64,
        threshold: f64,
    },

    #[error("reference norm is zero; relative error undefined")]
    DegenerateReference,

    #[error("{path}:{line}: {message}")]
    Config {
        path: String,
        line: usize,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularSystem(_)
                | Error::ConvergenceFailure { .. }
                | Error::NonlinearDivergence { .. }
                | Error::DegenerateReference
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
