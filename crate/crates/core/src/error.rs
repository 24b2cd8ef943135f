use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Caller misuse: bad flags, unknown tags, inconsistent arguments.
    #[error("usage error: {0}")]
    Usage(String),

    /// The computation produced non-finite values or failed to converge.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Inputs are valid but the requested quantity is undefined for them.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// The normal matrix of a fit is singular along these parameters.
    #[error("rank-deficient fit: parameters {params:?} are not identifiable")]
    RankDeficient { params: Vec<String> },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(String),
}

impl Error {
    /// Process exit status for the CLI: 2 for usage-class errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Config(_) | Error::Csv(_) | Error::Domain(_) => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
