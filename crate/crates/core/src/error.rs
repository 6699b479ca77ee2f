use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter is outside its admissible range.
    #[error("invalid configuration: {0}")]
    Config(String),
    /// An argument outside a function's mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// A numerical search or estimator could not produce an answer.
    #[error("solver failure: {0}")]
    Solver(String),
    /// The channel draw cannot support the requested PPM operating point.
    #[error("infeasible draw (margin {margin:.6})")]
    Infeasible { margin: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
