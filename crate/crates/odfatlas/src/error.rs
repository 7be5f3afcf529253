//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by atlas-estimation operations.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated an operation precondition (mismatched grids,
    /// out-of-range parameters, wrong lengths).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A geometric quantity left its admissible domain (tangent norm past
    /// the injectivity radius, distance at or beyond the cut locus).
    #[error("domain error: {0}")]
    Domain(String),

    /// An input collapsed to something with no valid projection
    /// (all-zero density after clamping).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// An iterative solver exhausted its iteration budget.
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    /// A velocity field moved points too far in one timestep for the flow
    /// to stay invertible.
    #[error("flow instability at timestep {timestep}: {detail}")]
    FlowInstability { timestep: usize, detail: String },

    /// A transformation folded (non-positive Jacobian determinant).
    #[error("folded map: {0}")]
    FoldedMap(String),

    /// A line search could not find a decreasing step.
    #[error("step-size failure: {0}")]
    StepSize(String),

    /// A binary container is malformed.
    #[error("format error at byte {offset}: {detail}")]
    Format { offset: u64, detail: String },

    /// Well-formed data violating a field invariant.
    #[error("validation error: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
