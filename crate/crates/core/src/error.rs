use thiserror::Error;

/// Errors produced by mesh construction, assembly, linear solves and time stepping.
#[derive(Debug, Error)]
pub enum Error {
    #[error("refinement level {level} exceeds the supported maximum of {max}")]
    Capacity { level: usize, max: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("triangle {index} is degenerate (signed area {area:e})")]
    DegenerateTriangle { index: usize, area: f64 },

    #[error("field evaluated to non-finite value {value} at vertex {vertex}")]
    Evaluation { vertex: usize, value: f64 },

    #[error("potential evaluation overflow at vertex {vertex} (u = {value})")]
    PotentialOverflow { vertex: usize, value: f64 },

    #[error("linear solver failed: {message} (relative residual {residual:e})")]
    Solver { message: String, residual: f64 },

    #[error("state error: {0}")]
    State(String),

    #[error("non-finite state after step {step}")]
    Divergence { step: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
