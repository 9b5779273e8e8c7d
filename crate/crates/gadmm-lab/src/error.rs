//! Error type shared across the library.

use thiserror::Error;

/// Errors produced by solvers, models, and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument violates a precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The stacked normal-equations system is singular (rank-deficient data
    /// with zero regularization).
    #[error("singular system: stacked normal equations are not positive definite")]
    SingularSystem,

    /// The objective error exceeded the divergence guard.
    #[error("solver diverged at round {round}: objective error exceeded {factor:.0e} x initial")]
    Divergence { round: usize, factor: f64 },

    /// Experiment configuration failed validation or parsing.
    #[error("config error: {0}")]
    Config(String),

    /// Underlying filesystem failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Variant summaries refer to different problems and cannot be compared.
    #[error("invalid comparison: {0}")]
    ComparisonMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Process exit code for the CLI: 0 success, 2 config, 3 divergence, 4 i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => 2,
            Error::Divergence { .. } => 3,
            Error::Io(_) => 4,
            _ => 1,
        }
    }
}
