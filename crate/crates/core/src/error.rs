use thiserror::Error;

/// Errors surfaced by the inference engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("trajectory infeasible at t = {t}: {compartment} became negative ({value})")]
    InfeasibleTrajectory {
        t: usize,
        compartment: &'static str,
        value: f64,
    },

    #[error("value {0} is outside the open unit interval")]
    Domain(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("cumulative count never reaches {threshold}")]
    InsufficientData { threshold: f64 },

    #[error("dates are not contiguous: {prev} is followed by {next}")]
    NonContiguousDates {
        prev: chrono::NaiveDate,
        next: chrono::NaiveDate,
    },

    #[error("root finder did not converge (residuals {residuals:?})")]
    SolveFailure { residuals: Vec<f64> },

    #[error("chain is degenerate: {0}")]
    DegenerateChain(String),

    #[error("index {index} out of range ({range})")]
    Index { index: usize, range: String },

    #[error("matrix factorization failed: {0}")]
    Factorization(String),

    #[error("no initial state with a finite target after {attempts} attempts")]
    Initialization { attempts: usize },

    #[error("infeasible construction: {0}")]
    Infeasible(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
