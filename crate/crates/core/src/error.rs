use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("wavenumber k = {k} outside the bound-state window (0, {alpha})")]
    OutsideBoundWindow { k: f64, alpha: f64 },

    #[error("requested {requested} bound levels but the well only supports {available}")]
    InsufficientLevels { requested: usize, available: usize },

    #[error("root bracket failed on branch {branch}: no sign change")]
    NoBracket { branch: usize },

    #[error("operation undefined at a Bloch pole (theta = {theta})")]
    Pole { theta: f64 },

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("probe position z_a = {za} reaches the regularization cutoff {cutoff}")]
    ProbeDomain { za: f64, cutoff: f64 },

    #[error("state already collapsed by a momentum measurement")]
    AlreadyMeasured,

    #[error("axis plan rejected: {0}")]
    InvalidPlan(String),

    #[error("constraint argument {value} lies outside [-1, 1] beyond rounding")]
    InconsistentMeasurement { value: f64 },

    #[error("no azimuth common to both axes: closest candidates differ by {distance} rad (tolerance {tolerance})")]
    NoCommonSolution { distance: f64, tolerance: f64 },

    #[error("degenerate weights: {0}")]
    DegenerateWeights(String),

    #[error("propagator stability violated: {0}")]
    Stability(String),
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
