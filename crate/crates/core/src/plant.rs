//! Servo speed channel modelled as a first-order lag with transport delay.
//!
//! The lag is discretized exactly under a zero-order hold on a fine sub-step,
//! and the dead time is realized as a FIFO of whole sub-steps. The load
//! disturbance is added to the motor voltage before the lag.

use std::collections::VecDeque;

use crate::error::{ensure_finite, Error, Result};

/// Continuous FOPDT parameters: `gain · e^{-dead_time·s} / (1 + time_constant·s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FopdtModel {
    /// Steady-state gain, volts out per volt in.
    pub gain: f64,
    /// Lag time constant in seconds.
    pub time_constant: f64,
    /// Transport delay in seconds.
    pub dead_time: f64,
}

impl FopdtModel {
    /// Identified speed channel of the servo trainer.
    pub const SERVO_SPEED: FopdtModel = FopdtModel {
        gain: 0.946,
        time_constant: 0.4425,
        dead_time: 0.0325,
    };

    pub fn new(gain: f64, time_constant: f64, dead_time: f64) -> Result<Self> {
        let model = FopdtModel {
            gain,
            time_constant,
            dead_time,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.gain.is_finite() || self.gain == 0.0 {
            return Err(Error::invalid("gain_Ks", "must be finite and nonzero"));
        }
        if !(self.time_constant.is_finite() && self.time_constant > 0.0) {
            return Err(Error::invalid("time_constant_T", "must be > 0"));
        }
        if !(self.dead_time.is_finite() && self.dead_time >= 0.0) {
            return Err(Error::invalid("dead_time_L", "must be >= 0"));
        }
        Ok(())
    }
}

impl Default for FopdtModel {
    fn default() -> Self {
        FopdtModel::SERVO_SPEED
    }
}

/// Speed sensor scaling between volts and RPM.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorGain {
    rpm_per_volt: f64,
}

impl SensorGain {
    /// 1 V at the sensor corresponds to 200 RPM.
    pub const SERVO: SensorGain = SensorGain {
        rpm_per_volt: 200.0,
    };

    pub fn new(rpm_per_volt: f64) -> Result<Self> {
        if rpm_per_volt.is_finite() && rpm_per_volt > 0.0 {
            Ok(SensorGain { rpm_per_volt })
        } else {
            Err(Error::invalid("rpm_per_volt", "must be > 0"))
        }
    }

    pub fn rpm_per_volt(&self) -> f64 {
        self.rpm_per_volt
    }

    pub fn volts_to_rpm(&self, volts: f64) -> f64 {
        volts * self.rpm_per_volt
    }

    pub fn rpm_to_volts(&self, rpm: f64) -> f64 {
        rpm / self.rpm_per_volt
    }
}

impl Default for SensorGain {
    fn default() -> Self {
        SensorGain::SERVO
    }
}

/// Returns `numerator / denominator` as a whole number when it is one to
/// within 1e-9 relative tolerance.
pub(crate) fn whole_ratio(numerator: f64, denominator: f64) -> Option<usize> {
    let ratio = numerator / denominator;
    let rounded = ratio.round();
    if rounded >= 0.0 && (ratio - rounded).abs() <= 1e-9 * ratio.abs().max(1.0) {
        Some(rounded as usize)
    } else {
        None
    }
}

/// A plant that can be driven by a sample-synchronous speed loop.
///
/// The simulated [`FopdtPlant`] is the only backend here; a hardware DAQ
/// backend would implement the same contract.
pub trait ServoPlant {
    /// Current sensor output in volts.
    fn output(&self) -> f64;

    /// Holds `u + d` at the motor input for `sub_steps` integration steps and
    /// returns the sensor output at the end of the interval.
    fn hold(&mut self, u: f64, d: f64, sub_steps: usize) -> Result<f64>;
}

/// Discrete simulation state of a [`FopdtModel`].
#[derive(Debug, Clone)]
pub struct FopdtPlant {
    model: FopdtModel,
    sub_step: f64,
    pole: f64,
    lag: f64,
    delay: VecDeque<f64>,
    delay_len: usize,
    output: f64,
}

impl FopdtPlant {
    /// Builds a plant at rest. The dead time must be a whole number of
    /// sub-steps.
    pub fn new(model: FopdtModel, sub_step: f64) -> Result<Self> {
        model.validate()?;
        if !(sub_step.is_finite() && sub_step > 0.0) {
            return Err(Error::invalid("sub_step_h", "must be > 0"));
        }
        let delay_len = match whole_ratio(model.dead_time, sub_step) {
            Some(n) => n,
            None => {
                let n = (model.dead_time / sub_step).round().max(1.0);
                return Err(Error::DeadTimeNotMultiple {
                    dead_time: model.dead_time,
                    sub_step,
                    nearest: model.dead_time / n,
                });
            }
        };
        Ok(FopdtPlant {
            model,
            sub_step,
            pole: (-sub_step / model.time_constant).exp(),
            lag: 0.0,
            delay: std::iter::repeat_n(0.0, delay_len).collect(),
            delay_len,
            output: 0.0,
        })
    }

    pub fn model(&self) -> &FopdtModel {
        &self.model
    }

    pub fn sub_step(&self) -> f64 {
        self.sub_step
    }

    /// Number of sub-steps held in the transport-delay buffer.
    pub fn delay_len(&self) -> usize {
        self.delay_len
    }

    /// Undelayed output of the first-order lag.
    pub fn lag_output(&self) -> f64 {
        self.lag
    }

    /// Advances one sub-step with `u` and load disturbance `d` (both volts)
    /// held constant, and returns the delayed output.
    pub fn step(&mut self, u: f64, d: f64) -> Result<f64> {
        ensure_finite(u, "plant input u")?;
        ensure_finite(d, "plant disturbance d")?;
        let drive = u + d;
        self.lag = self.pole * self.lag + (1.0 - self.pole) * self.model.gain * drive;
        self.output = if self.delay_len == 0 {
            self.lag
        } else {
            self.delay.push_back(self.lag);
            self.delay.pop_front().unwrap_or(0.0)
        };
        Ok(self.output)
    }

    /// Returns the plant to rest.
    pub fn reset(&mut self) {
        self.lag = 0.0;
        self.output = 0.0;
        self.delay.iter_mut().for_each(|v| *v = 0.0);
    }
}

impl ServoPlant for FopdtPlant {
    fn output(&self) -> f64 {
        self.output
    }

    fn hold(&mut self, u: f64, d: f64, sub_steps: usize) -> Result<f64> {
        for _ in 0..sub_steps {
            self.step(u, d)?;
        }
        Ok(self.output)
    }
}
