use thiserror::Error;

use crate::acquisition::AllocationReport;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Arguments violate a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Vector or row width differs from what the receiver was built with.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// Data admits no meaningful answer (e.g. all points identical).
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// Solver hit its iteration cap before certifying optimality.
    #[error("solver stopped after {iterations} epochs with relative gap {gap:.3e}")]
    Convergence { gap: f64, iterations: usize },

    /// A feature query was issued against an empty budget.
    #[error("budget exhausted after spending {spent} of {initial} units")]
    BudgetExhausted { initial: u64, spent: u64 },

    /// Allocation could not finish; the partial report preserves what was
    /// spent so the ledger still reconciles.
    #[error("allocation failed: {message}")]
    Allocation {
        message: String,
        partial: Box<AllocationReport>,
    },

    /// Malformed tabular input. `row` is 1-based and counts data rows.
    #[error("{path}: {}{message}", row.map(|r| format!("row {r}: ")).unwrap_or_default())]
    Csv {
        path: String,
        row: Option<u64>,
        message: String,
    },

    /// Experiment configuration is self-inconsistent.
    #[error("config error: {0}")]
    Config(String),

    /// An experiment run produced nothing usable.
    #[error("experiment failed: {0}")]
    Experiment(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialization(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
