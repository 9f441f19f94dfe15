use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unknown identifier `{name}` (line {line}, column {column})")]
    UnknownIdentifier {
        name: String,
        line: usize,
        column: usize,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("two forms of the entropy variation disagree: {first} vs {second}")]
    InconsistentForms { first: f64, second: f64 },

    #[error("singular pivot {pivot}: |f_pivot - mean f| = {gap:e} is below tolerance")]
    SingularPivot { pivot: usize, gap: f64 },

    #[error("no valid pivot: all f values coincide with their mean")]
    NoValidPivot,

    #[error("degenerate point: f[{a}] and f[{b}] coincide")]
    DegeneratePoint { a: usize, b: usize },

    #[error("zero mean fitness at step {step}")]
    ZeroMeanFitness { step: usize },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("evaluation budget of {budget} exceeded (best estimate {estimate}, error {error_estimate:e})")]
    BudgetExceeded {
        budget: usize,
        estimate: f64,
        error_estimate: f64,
    },

    #[error("degenerate region: {0}")]
    DegenerateRegion(String),

    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
