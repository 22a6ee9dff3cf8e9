use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid set description: {0}")]
    InvalidSet(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("conic program infeasible (primal residual {r_prim:.3e}, dual residual {r_dual:.3e})")]
    Infeasible { r_prim: f64, r_dual: f64 },
    #[error("conic program unbounded below")]
    Unbounded,
    #[error("solver failed with status {status}: primal residual {r_prim:.3e}, dual residual {r_dual:.3e}")]
    SolverFailure {
        status: String,
        r_prim: f64,
        r_dual: f64,
    },
    #[error("randomized extraction failed after {trials} trials; best max gauge {best_gauge:.9} (need <= 1)")]
    ExtractionFailed { trials: usize, best_gauge: f64 },
    #[error("signal sampler exhausted after {0} rejections")]
    SamplerExhausted(usize),
    #[error("post-solve verification failed: {0}")]
    PostCheckFailed(String),
    #[error("descriptor error: {0}")]
    Descriptor(String),
    #[error("csv error: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
