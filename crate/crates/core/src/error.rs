use thiserror::Error;

/// Errors raised by the readout toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("charge-basis truncation not converged: {0}")]
    Convergence(String),

    #[error("no root in bracket: {0}")]
    NoRoot(String),

    #[error("too close to resonance: {0}")]
    Resonance(String),

    #[error("outside domain: {0}")]
    Domain(String),

    #[error("degenerate dispersive shifts: {0}")]
    Degenerate(String),

    #[error("integration step too coarse: {0}")]
    Step(String),

    #[error("geometry precondition failed: {0}")]
    Geometry(String),

    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    #[error("grid resolution insufficient: {0}")]
    Resolution(String),
}

pub type Result<T> = std::result::Result<T, Error>;
