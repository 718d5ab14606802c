use thiserror::Error;

/// Errors surfaced by the laboratory core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoreError {
    #[error("direction iteration did not converge (residual {residual:e})")]
    NonConvergence { residual: f64 },
    #[error("basis is numerically rank-deficient")]
    DegenerateBasis,
    #[error("frame orthogonality drifted to {drift:e}, past the step-control limit")]
    StepSizeFailure { drift: f64 },
    #[error("matrix is not upper triangular")]
    ShapeError,
    #[error("off-diagonal entry {value} exceeds the declared bound {bound}")]
    BoundError { value: f64, bound: f64 },
    #[error("A^n - I is singular for period {period}")]
    DegeneratePeriod { period: u32 },
    #[error("pressure root is not bracketed in [{lo}, {hi}]")]
    BracketFailure { lo: f64, hi: f64 },
    #[error("pressure curve is not convex (second difference {second_diff:e})")]
    NonConvexInput { second_diff: f64 },
    #[error("entropy profile is degenerate on the requested range")]
    DegenerateProfile,
    #[error("no exceedances observed for any horizon in the list")]
    AllZeroCounts,
    #[error("check skipped: a participating record was truncated at its horizon")]
    SkippedTruncated,
    #[error("smoothing budget infeasible: achieved mean gap {achieved}")]
    BudgetInfeasible { achieved: f64 },
    #[error("too few positive exceedances for tail estimation")]
    TooFewExceedances,
    #[error("horizon too small: {truncated_fraction} of samples truncated")]
    HorizonTooSmall { truncated_fraction: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}

pub type Result<T> = core::result::Result<T, CoreError>;
