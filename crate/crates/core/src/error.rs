use thiserror::Error;

/// Errors raised across the planner.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A domain object violates one of its invariants.
    #[error("validation error: {0}")]
    Validation(String),

    /// A resource option of one kind was handed to a routine for another.
    #[error("kind mismatch: expected {expected}, got {got}")]
    KindMismatch { expected: String, got: String },

    /// The instance cannot have a feasible plan whatever the solver does.
    #[error("infeasible by construction: {0}")]
    InfeasibleByConstruction(String),

    /// Input data could not be read or parsed.
    #[error("data error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Data { line: Option<usize>, message: String },

    /// Configuration problem.
    #[error("config error: {0}")]
    Config(String),

    /// The solver backend failed or returned something unusable.
    #[error("solver error: {0}")]
    Solver(String),

    /// The second stage became unbounded, which the formulation rules out.
    #[error("formulation error: {0}")]
    Formulation(String),

    /// The brute-force enumeration would exceed its budget.
    #[error("instance too large for enumeration: {count} assignments exceeds budget {budget}")]
    TooLarge { count: u128, budget: u128 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn data(line: Option<usize>, message: impl Into<String>) -> Self {
        Error::Data {
            line,
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
