use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("infeasible state: stock level {0} is negative")]
    InfeasibleState(f64),

    #[error("planning horizon must be positive, got {0}")]
    NonPositiveHorizon(f64),

    #[error("grid needs at least 3 points, got {0}")]
    GridTooSmall(usize),

    #[error("grid needs an even number of intervals, got {0}")]
    OddIntervals(usize),

    #[error("malformed trajectory: {0}")]
    MalformedTrajectory(String),

    #[error("model not supported by this solver: {0}")]
    UnsupportedModel(String),

    #[error("breakability b1 = {b1} is too small for the exponential solution on T = {horizon}; use the b1 = 0 path")]
    IllConditioned { b1: f64, horizon: f64 },

    #[error("x^(gamma-1) is singular at t = {t} (x = {x}) with no regularization floor")]
    Singularity { t: f64, x: f64 },

    #[error("singular tridiagonal Jacobian at Newton iteration {iteration} (row {row})")]
    SingularJacobian { iteration: usize, row: usize },

    #[error("config line {line}: key `{key}`: {message}")]
    Config { line: usize, key: String, message: String },

    #[error("missing key: {0}")]
    MissingKey(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
