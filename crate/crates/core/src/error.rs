use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input. `line` is 1-based and counts the header; `column` is
    /// 1-based when the problem is a single cell.
    #[error("parse error at line {line}{}: {message}", column.map(|c| format!(", column {c}")).unwrap_or_default())]
    Parse { line: u64, column: Option<usize>, message: String },

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("initialization error: {0}")]
    Initialization(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("degenerate iterate: |A x| fell below {threshold:e} after {restarts} restarts")]
    DegenerateIterate { threshold: f64, restarts: usize },

    #[error("singular design: condition number {condition:e} exceeds {limit:e}")]
    SingularDesign { condition: f64, limit: f64 },

    #[error("degenerate spectrum: all eigenvalues are zero")]
    DegenerateSpectrum,

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    /// True for failures caused by the input rather than by the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. } | Error::Parse { .. } | Error::Dimension(_) | Error::Precondition(_) | Error::Config(_)
        )
    }
}
