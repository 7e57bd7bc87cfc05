use thiserror::Error;

/// Errors raised by the estimators, learners and simulation harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MteError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no observations in arm {arm}")]
    EmptyArm { arm: u8 },

    #[error("zero covariate kernel mass for arm {arm} at x = {x:?}{}", observation.map(|i| format!(" (observation {i})")).unwrap_or_default())]
    DegenerateLocality { arm: u8, x: Vec<f64>, observation: Option<usize> },

    #[error("covariate column {column} has zero variance")]
    ConstantCovariate { column: usize },

    #[error("invalid density curve: {0}")]
    InvalidCurve(String),

    #[error("internal invariant violated: {0}")]
    InvariantViolation(String),

    #[error("configuration mismatch: {0}")]
    Configuration(String),

    #[error("no overlap: {0}")]
    NoOverlap(String),

    #[error("no observations to fit on for arm {arm}")]
    NoData { arm: u8 },

    #[error("learner failed to converge after {iterations} iterations")]
    Convergence { iterations: usize },

    #[error("an auxiliary sample lacks one treatment arm after {attempts} fold draws; consider stratified folds")]
    Stratification { attempts: usize },

    #[error("marginal density is not unimodal: local maxima near {locations:?}")]
    UnimodalityViolation { locations: Vec<f64> },

    #[error("{failed} of {reps} Monte Carlo replications failed (limit 10%)")]
    Harness { failed: usize, reps: usize },
}

impl MteError {
    /// Short machine-readable tag for structured error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            MteError::InvalidArgument(_) => "invalid_argument",
            MteError::EmptyArm { .. } => "empty_arm",
            MteError::DegenerateLocality { .. } => "degenerate_locality",
            MteError::ConstantCovariate { .. } => "constant_covariate",
            MteError::InvalidCurve(_) => "invalid_curve",
            MteError::InvariantViolation(_) => "invariant_violation",
            MteError::Configuration(_) => "configuration",
            MteError::NoOverlap(_) => "no_overlap",
            MteError::NoData { .. } => "no_data",
            MteError::Convergence { .. } => "convergence",
            MteError::Stratification { .. } => "stratification",
            MteError::UnimodalityViolation { .. } => "unimodality_violation",
            MteError::Harness { .. } => "harness",
        }
    }
}

pub type Result<T, E = MteError> = std::result::Result<T, E>;
