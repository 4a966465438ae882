//! Crate error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("eigensolver failed to converge")]
    EigenNonConvergence,

    #[error("singular value decomposition failed to converge")]
    SvdNonConvergence,

    #[error("time {0} outside tabulated kernel range [0, {1}]")]
    OutOfRange(f64, f64),

    #[error("tabulated kernel tail not decayed: last sample {last} exceeds {limit}")]
    TailNotDecayed { last: f64, limit: f64 },

    #[error("sufficient synchronization conditions violated (residual_29={:.3e}, residual_30={:.3e})", .0.max_residual_29, .0.max_residual_30)]
    ConditionsViolated(Box<crate::sync::ConditionReport>),

    #[error("mean delay of the memory kernel is not finite")]
    InfiniteMeanDelay,

    #[error("state norm exceeded {limit:.1e} at t={t}: divergence")]
    Divergence { t: f64, limit: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
