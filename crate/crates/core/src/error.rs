use thiserror::Error;

/// Every failure the laboratory can report.
///
/// Validation problems map to exit code 1 in the CLI, numerical failures to 2.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("quadrature tail {tail:.3e} exceeds tolerance relative to value {value:.3e}")]
    TailTooLarge { tail: f64, value: f64 },

    #[error("weighted integral diverges near the origin: first decade carries {first_decade:.3e} of {total:.3e}")]
    DivergentNearOrigin { first_decade: f64, total: f64 },

    #[error("field is not compatible with the quadrature grid: {0}")]
    GridMismatch(String),

    #[error("no bubble found within gradient distance {limit} (best candidate at {found:.4})")]
    NoNearbyBubble { limit: f64, found: f64 },

    #[error("optimizer did not converge within {0} evaluations")]
    NotConverged(usize),

    #[error("spectral gap is negative ({0:.6e})")]
    NegativeGap(f64),

    #[error("sector {upper} undercuts sector {lower}: {upper_value:.6e} < {lower_value:.6e}")]
    SectorOrderingUnexpected { lower: usize, upper: usize, lower_value: f64, upper_value: f64 },

    #[error("origin singularity unresolved: first-decade share {0:.3e}")]
    SingularityUnresolved(f64),

    #[error("eigensolver failure: {0}")]
    Eigen(String),

    #[error("hypothesis violated: {0}")]
    ConstraintViolated(String),

    #[error("separation condition violated: v(x_far) = {v_far:.3e} >= 0.1 * min eps = {limit:.3e}")]
    ConditionViolated { v_far: f64, limit: f64 },

    #[error("constant search failed: {0}")]
    SearchFailed(String),

    #[error("orthogonalization failed: {0}")]
    Orthogonalization(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl LabError {
    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Invalid(_) | LabError::Io(_) | LabError::Json(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(LabError::Invalid(msg.into()))
}
