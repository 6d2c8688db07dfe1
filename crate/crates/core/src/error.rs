use thiserror::Error;

/// Errors raised by the model, the transition maps and the gait solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid body parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("invalid timing: {0}")]
    InvalidTiming(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("unknown config key `{0}`")]
    UnknownConfigKey(String),

    #[error("singular linear system while {0}")]
    Singular(String),

    #[error("time {t} outside [0, {duration}]")]
    TimeOutOfRange { t: f64, duration: f64 },

    #[error("no pseudo-passive stride time in [{lo}, {hi}] s (smallest relative singular value {best:e} at {at} s)")]
    NoRoot { lo: f64, hi: f64, best: f64, at: f64 },

    #[error("null space has dimension {found}, expected {expected}")]
    NullSpaceDimension { found: usize, expected: usize },

    #[error("infeasible constraints in block `{block}` (residual {residual:e})")]
    Infeasible { block: String, residual: f64 },

    #[error("{0}")]
    Undefined(String),
}

pub type Result<T> = std::result::Result<T, Error>;
