use alloc::string::String;

/// Errors raised by model construction and the numerical routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("parameters outside the admissible set: {0}")]
    Inadmissible(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("quadrature did not converge: estimate {estimate}, error bound {error_bound}")]
    Quadrature { estimate: f64, error_bound: f64 },
    #[error("truncation leaked {leaked:e} of probability mass (limit {limit:e})")]
    Leak { leaked: f64, limit: f64 },
    #[error("memory guard: {cells} cells requested, limit {limit}")]
    MemoryGuard { cells: usize, limit: usize },
    #[error("two-route disagreement: {what} differs by {difference:e} (bound {bound:e})")]
    Disagreement {
        what: String,
        difference: f64,
        bound: f64,
    },
    #[error("degenerate identity: {0}")]
    Degenerate(String),
    #[error("acceptance guard: rate {rate:e} below {floor:e}; {hint}")]
    Acceptance { rate: f64, floor: f64, hint: String },
    #[error("insufficient data: {0}")]
    Insufficient(String),
}

pub type Result<T> = core::result::Result<T, Error>;
