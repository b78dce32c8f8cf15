//! Sample-synchronous controller contract and the classic positional PID.

use crate::error::{ensure_finite, Error, Result};
use crate::pidnn::PidnnWeights;

/// Signals handed to a controller at one control instant, in sensor volts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerIo {
    pub setpoint: f64,
    pub measurement: f64,
}

impl ControllerIo {
    pub fn new(setpoint: f64, measurement: f64) -> Self {
        ControllerIo {
            setpoint,
            measurement,
        }
    }

    pub fn error(&self) -> f64 {
        self.setpoint - self.measurement
    }
}

/// A controller evaluated once per control period.
pub trait Controller: Send {
    /// Computes the actuator voltage for this sample, applying any online
    /// adaptation the controller performs.
    fn update(&mut self, io: ControllerIo) -> Result<f64>;

    /// Clears the dynamic state, keeping parameters.
    fn reset(&mut self);

    /// Current network weights, for controllers that have them.
    fn weights(&self) -> Option<PidnnWeights> {
        None
    }
}

/// Actuator saturation range in volts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputLimits {
    pub min: f64,
    pub max: f64,
}

impl OutputLimits {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) {
            return Err(Error::NonFinite("output limits"));
        }
        if min >= max {
            return Err(Error::invalid("u_min", "must be < u_max"));
        }
        Ok(OutputLimits { min, max })
    }

    /// Limits wide enough never to engage.
    pub fn unbounded() -> Self {
        OutputLimits {
            min: f64::MIN,
            max: f64::MAX,
        }
    }

    pub fn clamp(&self, u: f64) -> f64 {
        u.clamp(self.min, self.max)
    }

    pub fn contains(&self, u: f64) -> bool {
        self.min < u && u < self.max
    }
}

impl Default for OutputLimits {
    /// ±10 V, the usual DAC range.
    fn default() -> Self {
        OutputLimits {
            min: -10.0,
            max: 10.0,
        }
    }
}

/// Parallel-form PID gains: `kp`, `ki` in 1/s, `kd` in s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl PidGains {
    /// Gains from Kuhn's T-sum rule for the servo speed channel.
    pub const KUHN: PidGains = PidGains {
        kp: 1.057,
        ki: 3.125,
        kd: 0.08016,
    };

    /// Hand-picked unit gains.
    pub const UNIT: PidGains = PidGains {
        kp: 1.0,
        ki: 1.0,
        kd: 1.0,
    };

    pub fn new(kp: f64, ki: f64, kd: f64) -> Result<Self> {
        ensure_finite(kp, "kp")?;
        ensure_finite(ki, "ki")?;
        ensure_finite(kd, "kd")?;
        Ok(PidGains { kp, ki, kd })
    }
}

/// Positional PID with conditional-integration anti-windup.
///
/// `u = kp·e + ki·(I + e·Ts) + kd·(e − e_prev)/Ts`, clamped to the output
/// limits. The accumulator `I` only takes the new `e·Ts` when the unclamped
/// output lies strictly inside the limits. The derivative acts on the error
/// and is not filtered.
#[derive(Debug, Clone)]
pub struct Pid {
    gains: PidGains,
    period: f64,
    limits: OutputLimits,
    integral: f64,
    prev_error: f64,
}

impl Pid {
    pub fn new(gains: PidGains, period: f64, limits: OutputLimits) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::invalid("period_Ts", "must be > 0"));
        }
        Ok(Pid {
            gains,
            period,
            limits,
            integral: 0.0,
            prev_error: 0.0,
        })
    }

    pub fn gains(&self) -> PidGains {
        self.gains
    }

    /// Accumulated error integral in volt·seconds.
    pub fn integral(&self) -> f64 {
        self.integral
    }

    pub fn prev_error(&self) -> f64 {
        self.prev_error
    }

    pub fn step(&mut self, io: ControllerIo) -> Result<f64> {
        ensure_finite(io.setpoint, "setpoint")?;
        ensure_finite(io.measurement, "measurement")?;
        let e = io.error();
        let PidGains { kp, ki, kd } = self.gains;
        let candidate = self.integral + e * self.period;
        let raw = kp * e + ki * candidate + kd * (e - self.prev_error) / self.period;
        if self.limits.contains(raw) {
            self.integral = candidate;
        }
        self.prev_error = e;
        Ok(self.limits.clamp(raw))
    }
}

impl Controller for Pid {
    fn update(&mut self, io: ControllerIo) -> Result<f64> {
        self.step(io)
    }

    fn reset(&mut self) {
        self.integral = 0.0;
        self.prev_error = 0.0;
    }
}
