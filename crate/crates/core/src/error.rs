use thiserror::Error;

/// Errors raised anywhere in the fitting pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("correlation {rho} too close to +/-1")]
    DegenerateCorrelation { rho: f64 },

    #[error("matrix error: {0}")]
    Matrix(String),

    #[error("ill-conditioned matrix (condition estimate {condition:e})")]
    Conditioning { condition: f64 },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("ingestion error at row {row}, column {column}: {message}")]
    Ingestion {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("parameter layout error: expected {expected} coordinates, got {got}")]
    Layout { expected: usize, got: usize },

    #[error("IPF infeasible: margin {margin} has positive target on an all-zero slice")]
    IpfInfeasible { margin: usize },

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("model (G={g}, Q={q}) is not identifiable: {count} parameters > bound {bound}")]
    NotIdentifiable {
        g: usize,
        q: usize,
        count: usize,
        bound: usize,
    },

    #[error("initialization failed: {0}")]
    Initialization(String),

    #[error("optimizer failure: {0}")]
    Optimizer(String),

    #[error("all {n_starts} starts failed; first error: {first}")]
    AllStartsFailed { n_starts: usize, first: String },

    #[error("selection failed: {0}")]
    Selection(String),

    #[error("unknown scenario '{0}'")]
    UnknownScenario(String),

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
