use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid mesh: {0}")]
    Mesh(String),

    #[error("size limit: {0}")]
    Size(String),

    #[error("invalid argument: {0}")]
    Domain(String),

    /// A physical assumption (k_mβ_m < 1, dilution) is violated.
    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("singular: {0}")]
    Singular(String),

    #[error("near-singular mode at eps_c = {eps_c}, lambda_n = {lambda_n}: |det A_n| = {det_abs:e}")]
    NearSingularMode {
        eps_c: num_complex::Complex64,
        lambda_n: f64,
        det_abs: f64,
    },

    #[error("ill-conditioned Gram matrix at mode {mode}: {msg}")]
    IllConditioned { mode: usize, msg: String },

    #[error("no convergence: {0}")]
    Convergence(String),

    #[error("linear solve failed (condition estimate {condition:e}): {msg}")]
    Solver { msg: String, condition: f64 },
}

impl Error {
    /// Process exit code: 2 for bad input, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Io { .. }
            | Error::Parse { .. }
            | Error::Mesh(_)
            | Error::Size(_)
            | Error::Domain(_)
            | Error::Assumption(_) => 2,
            _ => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
