use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A model or estimator configuration is invalid.
    #[error("configuration error: {0}")]
    Config(String),

    /// A documented precondition of a diagnostic does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The smoothed density underflowed at an evaluation point, so the score is undefined.
    #[error("smoothed density underflow at x = {x} (f_r(x) = {density:e})")]
    TailUnderflow { x: f64, density: f64 },

    /// The local Newton step could not evaluate the score at some perturbed sample.
    #[error("estimator failed at coordinate {coordinate}, point {point}: {reason}")]
    Estimator {
        coordinate: usize,
        point: f64,
        reason: String,
    },

    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },
}
