use thiserror::Error;

/// Errors raised by the verification lab.
#[derive(Debug, Error)]
pub enum Error {
    #[error("region has no quadrature mass")]
    RegionNoMass,

    #[error("degenerate level set at {x:?}: |grad G| = {grad_norm:e} below floor {floor:e}")]
    DegenerateLevelSet {
        x: Vec<f64>,
        grad_norm: f64,
        floor: f64,
    },

    #[error("point {x:?} is not on the boundary: |G| = {residual:e} exceeds {tol:e}")]
    NotOnBoundary { x: Vec<f64>, residual: f64, tol: f64 },

    #[error("no boundary along search direction from {x0:?}")]
    NoBoundary { x0: Vec<f64> },

    #[error("support not compactly inside O (G = {value:e} at {x:?})")]
    SupportNotInside { x: Vec<f64>, value: f64 },

    #[error("point {x:?} is not interior to the domain (G = {value:e})")]
    NotInterior { x: Vec<f64>, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("spec rejected: {reason}")]
    SpecRejected { reason: String, witness: Option<f64> },

    #[error("solve did not converge: relative residual {residual:e} after {iterations} iterations")]
    NotConverged { residual: f64, iterations: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
