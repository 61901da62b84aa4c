use thiserror::Error;

/// Errors raised by grids, solvers, descents and checks.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("non-finite value {value} at node {index} (x = {location:?})")]
    NonFinite {
        index: usize,
        location: Vec<f64>,
        value: f64,
    },

    #[error("point {point:?} lies outside the grid box")]
    OutOfBox { point: Vec<f64> },

    #[error("empty target mask: grid minimum exceeds the threshold by {gap}")]
    EmptyMask { gap: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("explicit scheme blew up at t = {time}: increment {increment:e} exceeds {bound:e}")]
    Unstable {
        time: f64,
        increment: f64,
        bound: f64,
    },

    #[error("unknown objective '{0}'")]
    UnknownObjective(String),

    #[error("expression error: {0}")]
    Expression(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
