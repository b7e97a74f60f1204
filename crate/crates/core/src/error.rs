use thiserror::Error;

/// Errors raised by the transport engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid group spec: {0}")]
    InvalidSpec(String),
    #[error("element outside the injectivity radius of exp (|g - I| = {norm:.3e})")]
    OutOfRadius { norm: f64 },
    #[error("matrix is {distance:.3e} away from the group, repair refused")]
    TooFarFromGroup { distance: f64 },
    #[error("value violates {what} invariant (deviation {deviation:.3e})")]
    InvariantViolated { what: &'static str, deviation: f64 },
    #[error("path endpoints do not match (gap {gap:.3e})")]
    EndpointMismatch { gap: f64 },
    #[error("invalid reparameterization: {0}")]
    InvalidReparam(String),
    #[error("no cover set contains the path near t = {t:.6}")]
    NoCoveringSet { t: f64 },
    #[error("point outside the domain of {what}")]
    OutOfDomain { what: String },
    #[error("solver did not reach tolerance {tol:.3e} (estimate {achieved:.3e})")]
    ToleranceNotReached { tol: f64, achieved: f64 },
    #[error("jump {from} -> {to} at a point outside the overlap")]
    JumpOutsideOverlap { from: usize, to: usize },
    #[error("cocycles are defined over different covers or groups")]
    CoverMismatch,
    #[error("loop is not based at the requested basepoint (gap {gap:.3e})")]
    BasepointMismatch { gap: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no section sample at a path endpoint")]
    MissingSample,
    #[error("unsupported configuration: {0}")]
    UnsupportedGroup(String),
    #[error("missing transition function g_{i}{j}")]
    MissingTransition { i: usize, j: usize },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("scene error: {0}")]
    Scene(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
