use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum PicoreError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },
    #[error("downsampling factor {factor} does not divide {n_points} points")]
    NonDivisibleFactor { factor: usize, n_points: usize },
    #[error("axis of length {len} is too short for a {needed}-point stencil")]
    AxisTooShort { len: usize, needed: usize },
    #[error("CFL violation: max|u|*dt/h = {courant:.3} > 1")]
    CflViolation { courant: f64 },
    #[error("non-finite state at step {step}")]
    NonFiniteState { step: usize },
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("resolution {resolution} is below twice the retained modes ({modes})")]
    ResolutionTooLow { resolution: usize, modes: usize },
    #[error("sample {0} has no label")]
    MissingLabels(usize),
    #[error("budget {k} is outside [1, {n}]")]
    BudgetOutOfRange { k: usize, n: usize },
    #[error("zero vector at index {0}")]
    ZeroVector(usize),
    #[error("reference field has zero norm")]
    ZeroReference,
    #[error("zero denominator in cost accounting")]
    ZeroDenominator,
    #[error("selector {0} requires labels and cannot run in picore mode")]
    SelectorLabelRequired(String),
    #[error("reports mix datasets: {0} vs {1}")]
    MixedDatasets(String, String),
    #[error("config error: {0}")]
    Config(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = PicoreError> = std::result::Result<T, E>;

impl PicoreError {
    /// Whether the failure comes from the numerics rather than from inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            PicoreError::CflViolation { .. }
                | PicoreError::NonFiniteState { .. }
                | PicoreError::NoConvergence { .. }
        )
    }

    /// Stable process exit code: 2 for configuration problems, 3 for
    /// numerical failures, 1 for everything else (I/O and the like).
    pub fn exit_code(&self) -> i32 {
        match self {
            e if e.is_numerical() => 3,
            PicoreError::Io(_) | PicoreError::Csv(_) => 1,
            _ => 2,
        }
    }
}
