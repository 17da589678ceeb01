use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
///
/// Each variant maps onto one of the CLI exit codes through [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    /// A physical or numerical parameter lies outside its domain.
    #[error("parameter `{name}` out of domain: {reason}")]
    Domain { name: &'static str, reason: String },

    /// The configuration file is malformed or internally inconsistent.
    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    /// A binary or text data file does not match its format.
    #[error("format error in {path:?} at byte {offset}: {reason}")]
    Format {
        path: PathBuf,
        offset: u64,
        reason: String,
    },

    /// A time-tag stream violates the ordering contract.
    #[error("stream `{stream}` is not strictly increasing at index {index}")]
    Unsorted { stream: &'static str, index: usize },

    /// Detection direction with zero photon flux.
    #[error("dark detection direction: mean detection rate {rate:e} is zero")]
    DarkDirection { rate: f64 },

    /// A correlation function diverges (for example `1 + s + cos δ = 0`).
    #[error("divergent correlation: {0}")]
    Divergent(String),

    /// The generator has no unique stationary state.
    #[error("steady state not unique: nullspace dimension {nullspace_dim} (condition {condition:e})")]
    SteadyState { nullspace_dim: usize, condition: f64 },

    /// Numerical quadrature or iteration did not converge.
    #[error("no convergence in {what}: {detail}")]
    Convergence { what: &'static str, detail: String },

    /// The fringe scan has too little contrast to be fitted.
    #[error("fringe contrast {visibility:.4} below the 0.05 threshold")]
    LowContrast { visibility: f64 },

    /// Correlation curve too coarsely sampled for the requested jitter.
    #[error("curve step {step:e} s exceeds sigma/4 = {limit:e} s")]
    Undersampled { step: f64, limit: f64 },

    /// Invalid command-line usage detected after argument parsing.
    #[error("usage: {0}")]
    Usage(String),

    /// The oracle comparison found a mismatch.
    #[error("oracle mismatch: {0}")]
    OracleMismatch(String),

    #[error("io error on {path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 usage, 3 config, 4 data format, 5 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            Error::Config { .. } | Error::Domain { .. } => 3,
            Error::Format { .. } | Error::Unsorted { .. } | Error::Io { .. } | Error::Json(_) => 4,
            Error::DarkDirection { .. }
            | Error::Divergent(_)
            | Error::SteadyState { .. }
            | Error::Convergence { .. }
            | Error::LowContrast { .. }
            | Error::Undersampled { .. }
            | Error::OracleMismatch(_) => 5,
        }
    }
}
