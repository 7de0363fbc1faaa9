use thiserror::Error;

use crate::qspace::FactorLabel;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure category, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Precondition,
    Numerical,
    Calibration,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension {dim} (must be at least 2)")]
    InvalidDimension { dim: usize },

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("factor {0} is not part of the layout")]
    UnknownFactor(FactorLabel),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("time {t} outside schedule domain [0, {duration}]")]
    OutOfRange { t: f64, duration: f64 },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("truncation error: top {factor} level holds population {population:.3e}")]
    Truncation { factor: FactorLabel, population: f64 },

    #[error("step size underflow at t = {t} (h = {h:.3e}); last error norm {err_norm:.3e}")]
    StepSizeUnderflow { t: f64, h: f64, err_norm: f64 },

    #[error("step budget of {max_steps} exhausted at t = {t}")]
    MaxStepsExceeded { t: f64, max_steps: usize },

    #[error("non-finite value in integration at t = {t}")]
    NonFinite { t: f64 },

    #[error("Monte Carlo sampling failed: {0}")]
    Sampling(String),

    #[error("calibration failed: {reason}")]
    Calibration {
        reason: String,
        /// Coarse scan of the search box: (delta_1, duration, residual_1, residual_2).
        residual_map: Vec<[f64; 4]>,
    },
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::StepSizeUnderflow { .. }
            | Error::MaxStepsExceeded { .. }
            | Error::NonFinite { .. }
            | Error::Sampling(_) => ErrorClass::Numerical,
            Error::Calibration { .. } => ErrorClass::Calibration,
            _ => ErrorClass::Precondition,
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
