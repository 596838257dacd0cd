use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },

    #[error("invalid scenario or arguments: {0}")]
    Validation(String),

    #[error("window point {x:?} is caustic-proximal (J = {jacobian:.3e})")]
    CausticInWindow { x: Vec<f64>, jacobian: f64 },

    #[error(transparent)]
    Numerical(semiclassical::Error),
}

impl CliError {
    /// 2 for validation failures, 3 for numerical failures, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Validation(_) => 2,
            CliError::CausticInWindow { .. } | CliError::Numerical(_) => 3,
        }
    }
}

impl From<semiclassical::Error> for CliError {
    fn from(e: semiclassical::Error) -> Self {
        match e {
            semiclassical::Error::InvalidInput(m) => CliError::Validation(m),
            semiclassical::Error::InconsistentDerivative { .. } => CliError::Validation(e.to_string()),
            other => CliError::Numerical(other),
        }
    }
}
