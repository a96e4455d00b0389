use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Structurally invalid input (bad grids, mismatched shapes, missing fields).
    #[error("input error: {0}")]
    Input(String),

    /// An iterative method failed to converge; carries what was tried.
    #[error("convergence error: {what} (history: {history})")]
    Convergence { what: String, history: String },

    /// A simulation exceeded its configured resource cap.
    #[error("resource error: {0}")]
    Resource(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("manifest parse error: {0}")]
    Manifest(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
    pub fn convergence(what: impl Into<String>, history: impl Into<String>) -> Self {
        Error::Convergence {
            what: what.into(),
            history: history.into(),
        }
    }
}
