//! Error type shared by every module of the crate.

use thiserror::Error;

/// Failures reported by the numerical routines and the command-line layer.
///
/// Validation problems (`InvalidParams`, `Domain`, `GridTooSmall`, ...) are
/// distinguished from numerical failures through [`Error::is_validation`],
/// which the CLI maps onto its exit-code contract.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("amplitude bracket failure: {0}")]
    BracketFailure(String),

    #[error("ODE step size underflow at r = {r:e} (h = {h:e})")]
    StiffnessFailure { r: f64, h: f64 },

    #[error("profile rejected: {0}")]
    InvalidProfile(String),

    #[error("norm {0} diverges under the tail model")]
    DivergentNorm(&'static str),

    #[error("no root: {0}")]
    NoRoot(String),

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("indeterminate: {0}")]
    Indeterminate(String),

    #[error("no stabilized fit window: {0}")]
    WindowNotFound(String),

    #[error("grid too small: {0}")]
    GridTooSmall(String),

    #[error("non-finite field values at t = {0}")]
    NonFinite(f64),

    #[error("insufficient samples: need {need}, have {have}")]
    InsufficientSamples { need: usize, have: usize },

    #[error("too many failed rows: {0}")]
    PartialFailure(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl Error {
    /// True for errors caused by bad input rather than by a numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParams(_)
                | Error::Domain(_)
                | Error::HypothesisViolated(_)
                | Error::GridTooSmall(_)
                | Error::InsufficientSamples { .. }
        )
    }

    /// Short machine-readable tag used in error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParams(_) => "InvalidParams",
            Error::Domain(_) => "Domain",
            Error::BracketFailure(_) => "BracketFailure",
            Error::StiffnessFailure { .. } => "StiffnessFailure",
            Error::InvalidProfile(_) => "InvalidProfile",
            Error::DivergentNorm(_) => "DivergentNorm",
            Error::NoRoot(_) => "NoRoot",
            Error::HypothesisViolated(_) => "HypothesisViolated",
            Error::Indeterminate(_) => "Indeterminate",
            Error::WindowNotFound(_) => "WindowNotFound",
            Error::GridTooSmall(_) => "GridTooSmall",
            Error::NonFinite(_) => "NonFinite",
            Error::InsufficientSamples { .. } => "InsufficientSamples",
            Error::PartialFailure(_) => "PartialFailure",
            Error::Io(_) => "Io",
            Error::Serialization(_) => "Serialization",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
