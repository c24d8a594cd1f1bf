use thiserror::Error;

/// Raised whenever a barrier is evaluated outside its open domain
/// (`k² − z² < BARRIER_GUARD`).
#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("barrier violated on joint {joint}: |z| = {z_abs:.6e} with bound {bound:.6e}")]
pub struct BarrierViolation {
    /// Zero-based joint index.
    pub joint: usize,
    pub z_abs: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("ambiguous config key `{key}` (matches {candidates})")]
    AmbiguousKey { key: String, candidates: String },
    #[error("malformed override `{0}` (expected key=value)")]
    MalformedOverride(String),
    #[error("invalid `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

impl ConfigError {
    pub fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Self::Invalid { key: key.into(), reason: reason.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("constraint violation at t = {time:.6}: {violation}")]
    ConstraintViolation { time: f64, violation: BarrierViolation },
    #[error("numerical divergence at t = {time:.6}: {detail}")]
    Divergence { time: f64, detail: String },
}

impl SimError {
    pub fn kind(&self) -> &'static str {
        match self {
            SimError::Config(_) => "config_invalid",
            SimError::ConstraintViolation { .. } => "constraint_violation",
            SimError::Divergence { .. } => "divergence",
        }
    }
}
