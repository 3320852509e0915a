use thiserror::Error;

/// Errors raised by model construction, evaluation and integration.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("domain violation: {0}")]
    Domain(String),

    #[error("value out of representable range: {0}")]
    Range(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("infeasible initial condition: {0}")]
    Infeasible(String),

    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
