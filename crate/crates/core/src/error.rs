use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the simulation core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{field} {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error(
        "dead_time_L = {dead_time} s is not an integer multiple of sub_step_h = {sub_step} s \
         (nearest valid sub_step_h is {nearest} s)"
    )]
    DeadTimeNotMultiple {
        dead_time: f64,
        sub_step: f64,
        nearest: f64,
    },

    #[error("period_Ts = {period} s is not an integer multiple of sub_step_h = {sub_step} s")]
    PeriodNotMultiple { period: f64, sub_step: f64 },

    #[error("non-finite value for {0}")]
    NonFinite(&'static str),

    #[error("unknown PIDNN preset '{0}'")]
    UnknownPreset(String),

    #[error("unknown builtin scenario '{0}' (expected step200, staircase or loadchange)")]
    UnknownScenario(String),

    #[error("unknown controller '{0}'")]
    UnknownController(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("segment [{from}, {to}] s holds {len} samples; at least 10 are required")]
    SegmentTooShort { from: f64, to: f64, len: usize },

    #[error("segment [{from}, {to}] s lies outside the trace")]
    SegmentOutOfRange { from: f64, to: f64 },

    #[error("metric target must be nonzero")]
    ZeroTarget,
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}

pub(crate) fn ensure_finite(value: f64, what: &'static str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(what))
    }
}
