use thiserror::Error;

use crate::hilbert::Subsystem;

pub type Result<T> = std::result::Result<T, QedError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QedError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("subsystem {0} is not part of the layout")]
    UnknownSubsystem(Subsystem),

    #[error("subsystem {0} appears more than once")]
    DuplicateSubsystem(Subsystem),

    #[error("operator and state use different layouts")]
    LayoutMismatch,

    #[error("{name} = {value} is outside [{min}, {max}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("invalid value for {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("un-collapsing strength p_u = {0} is infeasible (must lie in [0, 1])")]
    InfeasibleUncollapse(f64),

    #[error("no branch survives post-selection (zero-probability outcome)")]
    EmptySelection,

    #[error("subsystem {subsystem} holds population above one excitation")]
    ExcitationOverflow { subsystem: Subsystem },

    #[error("input states do not span the qubit operator space")]
    SingularInputSet,

    #[error("confusion matrix is not invertible")]
    SingularReadout,

    #[error("process matrix has zero trace")]
    ZeroTrace,

    #[error("config error: {0}")]
    Config(String),
}

impl QedError {
    pub(crate) fn check_unit(name: &'static str, value: f64) -> Result<f64> {
        if value.is_finite() && (0.0..=1.0).contains(&value) {
            Ok(value)
        } else {
            Err(QedError::OutOfRange {
                name,
                value,
                min: 0.0,
                max: 1.0,
            })
        }
    }
}
