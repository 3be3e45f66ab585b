use thiserror::Error;

pub type Result<T, E = NhError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum NhError {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("Hilbert-space dimension {dim} exceeds the configured cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular model: {0}")]
    Singular(String),

    #[error("unsupported structure: {0}")]
    Unsupported(String),

    #[error("eigensolver failed for a {dim}x{dim} matrix: {reason} (max residual {max_residual:e}, bound {bound:e})")]
    Convergence {
        dim: usize,
        reason: String,
        max_residual: f64,
        bound: f64,
    },

    #[error("reference energy lies within {distance:e} of the spectrum (tolerance {tol:e})")]
    IllConditionedContour { distance: f64, tol: f64 },

    #[error("winding undefined: {0}")]
    AtTransition(String),

    #[error("winding did not settle to an integer after refinement (raw phase {raw_phase})")]
    NonIntegerWinding { raw_phase: f64 },

    #[error("state derivative ill-defined along '{label}': {reason}")]
    DerivativeIllDefined { label: String, reason: String },

    #[error("numerical inconsistency: {0}")]
    NumericalInconsistency(String),

    #[error("precision bound undefined: Fisher matrix condition number {condition:e}")]
    BoundUndefined { condition: f64 },

    #[error("band tracking ambiguous after {refinements} refinements")]
    TrackingAmbiguity { refinements: usize },

    #[error("sweep failed at {failed} of {total} grid points")]
    SweepFailed { failed: usize, total: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl NhError {
    /// Whether the error stems from bad input rather than a numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            NhError::InvalidParams(_)
                | NhError::DimensionCap { .. }
                | NhError::Domain(_)
                | NhError::Unsupported(_)
                | NhError::Config(_)
        )
    }

    /// Short machine-readable tag, used for failed sweep rows and CLI stderr.
    pub fn tag(&self) -> &'static str {
        match self {
            NhError::InvalidParams(_) => "invalid_params",
            NhError::DimensionCap { .. } => "dimension_cap",
            NhError::Domain(_) => "domain",
            NhError::Singular(_) => "singular",
            NhError::Unsupported(_) => "unsupported",
            NhError::Convergence { .. } => "convergence",
            NhError::IllConditionedContour { .. } => "ill_conditioned_contour",
            NhError::AtTransition(_) => "at_transition",
            NhError::NonIntegerWinding { .. } => "non_integer_winding",
            NhError::DerivativeIllDefined { .. } => "derivative_ill_defined",
            NhError::NumericalInconsistency(_) => "numerical_inconsistency",
            NhError::BoundUndefined { .. } => "bound_undefined",
            NhError::TrackingAmbiguity { .. } => "tracking_ambiguity",
            NhError::SweepFailed { .. } => "sweep_failed",
            NhError::Config(_) => "config",
            NhError::Io(_) => "io",
            NhError::Csv(_) => "csv",
            NhError::Json(_) => "json",
        }
    }
}
