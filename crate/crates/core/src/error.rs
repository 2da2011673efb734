use thiserror::Error;

/// Errors produced by the model, spectral, solver, and harness layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("sign pattern {0} is not linearly well posed")]
    NotWellPosed(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("symbol violates the realness parity contract: {0}")]
    SymbolParity(String),

    #[error("mode {index} (k = {ktilde:.6e}) is numerically singular: |det| = {det:.3e}")]
    SingularMode { index: usize, ktilde: f64, det: f64 },

    #[error("degenerate iterate: stabilizing-factor denominator is zero")]
    DegenerateIterate,

    #[error("no convergence after {iterations} iterations (last residual {residual:.3e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("stage iteration stalled at {residual:.3e} after {iterations} iterations (t = {time})")]
    StageFailure {
        time: f64,
        iterations: usize,
        residual: f64,
    },

    #[error("negative radicand in the dispersion relation at k = {0}")]
    NegativeRadicand(f64),

    #[error("window holds {got} iterates but {needed} are required")]
    WindowTooShort { needed: usize, got: usize },

    #[error("flat field: no peak above threshold")]
    NoPeak,

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("malformed input {path}: {reason}")]
    Malformed { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
