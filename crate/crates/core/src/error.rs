use std::path::PathBuf;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-positive depth h = {depth} at grid point {point}")]
    NonPositiveDepth { point: usize, depth: f64 },

    #[error("velocity is undefined where the depth is zero (grid point {point})")]
    UndefinedVelocity { point: usize },

    #[error("size mismatch: expected {expected}, got {actual} ({what})")]
    SizeMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("index {index} out of range for {what} (valid: {valid})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        valid: String,
    },

    #[error("streaming matrix for one grid point has no meaning: N ≥ 3 required, got N = {0}")]
    TooFewGridPoints(usize),

    #[error("instability detected at time step {step}: {reason}")]
    Instability { step: usize, reason: String },

    #[error("singular or malformed system: {0}")]
    Singular(String),

    #[error("relative residual {residual:e} exceeds tolerance {tolerance:e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },

    #[error(
        "{what} did not converge after {iterations} iterations (last estimate {last_estimate:e})"
    )]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        last_estimate: f64,
    },

    #[error("no admissible polynomial up to degree {max_degree}; best sup error {best_error:e}")]
    NotAdmissible { max_degree: usize, best_error: f64 },

    #[error("no propagation detected within {steps} time steps")]
    NoPropagation { steps: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
