use thiserror::Error;

use crate::su2core::GateClass;

/// Errors raised by the abacus simulator.
#[derive(Debug, Error)]
pub enum AbacusError {
    #[error("matrix is not unitary (deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("gate of class {0:?} is outside the scale-invariant family")]
    NotScaleInvariant(GateClass),

    #[error("invalid physical configuration: {0}")]
    InvalidConfig(String),

    #[error("profile is not normalizable: {0}")]
    NotNormalizable(String),

    #[error("control qubit is not classical: max(p0, p1) = {max_probability:.6} < {threshold}")]
    SuperposedControl { max_probability: f64, threshold: f64 },

    #[error("grid engine accuracy breakdown: step halving changed the state by {change:.3e} in L2")]
    AccuracyBreakdown { change: f64 },

    #[error("discretized connection condition is singular for this grid spacing")]
    SingularInterface,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("state mismatch: {0}")]
    StateMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl AbacusError {
    /// True for failures that are violations of the physics contract
    /// (as opposed to malformed input or I/O trouble).
    pub fn is_contract_violation(&self) -> bool {
        matches!(
            self,
            AbacusError::NotUnitary { .. }
                | AbacusError::NotScaleInvariant(_)
                | AbacusError::SuperposedControl { .. }
                | AbacusError::NotNormalizable(_)
                | AbacusError::StateMismatch(_)
                | AbacusError::SingularInterface
        )
    }
}

pub type Result<T> = std::result::Result<T, AbacusError>;
