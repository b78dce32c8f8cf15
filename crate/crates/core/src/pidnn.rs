//! 3-3-1 PID neural network controller.
//!
//! Two inputs (setpoint and feedback), three hidden neurons acting as
//! proportional, integral and derivative elements with ±1 saturation, and a
//! linear output neuron. The integral neuron accumulates over its own
//! previous output; the derivative neuron differences its net input. The
//! output layer sums the saturated hidden outputs.
//!
//! Online learning takes one gradient step per sample on
//! `E = ½·(r_n − y_n)²`, replacing the unknown plant Jacobian `∂y/∂u` with
//! the sign of the plant gain.

use crate::controllers::{Controller, ControllerIo, OutputLimits};
use crate::error::{ensure_finite, Error, Result};

/// Connection weights. `hidden[j][i]` links input `i` (0 = setpoint,
/// 1 = feedback) to hidden neuron `j` (0 = P, 1 = I, 2 = D); `output[j]`
/// links hidden neuron `j` to the output neuron.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidnnWeights {
    pub hidden: [[f64; 2]; 3],
    pub output: [f64; 3],
}

impl PidnnWeights {
    /// Every hidden row is `(+1, −1)`, so each hidden net input is the
    /// normalized error.
    pub fn error_rows(output: [f64; 3]) -> Self {
        PidnnWeights {
            hidden: [[1.0, -1.0]; 3],
            output,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.hidden
            .iter()
            .flatten()
            .chain(self.output.iter())
            .copied()
    }
}

/// Input and output scaling around the ±1 neuron range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    /// Volts per unit network input.
    pub input_scale: f64,
    /// Volts per unit network output.
    pub output_scale: f64,
}

impl Normalization {
    pub fn new(input_scale: f64, output_scale: f64) -> Result<Self> {
        if !(input_scale.is_finite() && input_scale > 0.0) {
            return Err(Error::invalid("norm_scale_r", "must be > 0"));
        }
        if !(output_scale.is_finite() && output_scale > 0.0) {
            return Err(Error::invalid("norm_scale_u", "must be > 0"));
        }
        Ok(Normalization {
            input_scale,
            output_scale,
        })
    }
}

/// Neuron memories carried between samples.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PidnnState {
    /// Previous (saturated) output of the integral neuron.
    pub integral: f64,
    /// Previous net input of the derivative neuron.
    pub derivative_input: f64,
}

/// Sign of the plant's DC gain, used in place of `∂y/∂u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlantSign {
    Positive,
    Negative,
}

impl PlantSign {
    pub fn value(self) -> f64 {
        match self {
            PlantSign::Positive => 1.0,
            PlantSign::Negative => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnConfig {
    pub rate: f64,
    pub plant_sign: PlantSign,
    pub enabled: bool,
    /// Every weight is clamped to `±weight_limit` after an update.
    pub weight_limit: f64,
}

impl LearnConfig {
    pub const DEFAULT_RATE: f64 = 0.02;
    pub const DEFAULT_WEIGHT_LIMIT: f64 = 10.0;

    pub fn disabled() -> Self {
        LearnConfig {
            enabled: false,
            ..LearnConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate.is_finite() && self.rate >= 0.0) {
            return Err(Error::invalid("rate_eta", "must be >= 0"));
        }
        if !(self.weight_limit.is_finite() && self.weight_limit > 0.0) {
            return Err(Error::invalid("weight_limit", "must be > 0"));
        }
        Ok(())
    }
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            rate: Self::DEFAULT_RATE,
            plant_sign: PlantSign::Positive,
            enabled: true,
            weight_limit: Self::DEFAULT_WEIGHT_LIMIT,
        }
    }
}

/// Intermediate values of one forward pass, kept for the learning step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardPass {
    /// Normalized setpoint and feedback.
    pub inputs: [f64; 2],
    /// Hidden net inputs `u_Hj`.
    pub net: [f64; 3],
    /// Arguments of the hidden saturations: `u_H1`, `X_H2(k−1) + u_H2`,
    /// `u_H3 − u_H3(k−1)`.
    pub activation: [f64; 3],
    /// Saturated hidden outputs `X_Hj`.
    pub hidden: [f64; 3],
    /// Output neuron value before denormalization.
    pub output_norm: f64,
    /// Actuator voltage after denormalization and clamping.
    pub u: f64,
}

impl ForwardPass {
    pub fn saturated(&self, neuron: usize) -> bool {
        self.activation[neuron].abs() > 1.0
    }
}

fn saturate(x: f64) -> f64 {
    x.clamp(-1.0, 1.0)
}

/// Stateless forward pass: evaluates the network for one sample given the
/// neuron memories.
pub fn forward(
    weights: &PidnnWeights,
    state: &PidnnState,
    norm: &Normalization,
    limits: &OutputLimits,
    setpoint: f64,
    feedback: f64,
) -> ForwardPass {
    let inputs = [setpoint / norm.input_scale, feedback / norm.input_scale];
    let net = weights
        .hidden
        .map(|row| row[0] * inputs[0] + row[1] * inputs[1]);
    let activation = [
        net[0],
        state.integral + net[1],
        net[2] - state.derivative_input,
    ];
    let hidden = activation.map(saturate);
    let output_norm = weights
        .output
        .iter()
        .zip(&hidden)
        .map(|(w, x)| w * x)
        .sum::<f64>();
    ForwardPass {
        inputs,
        net,
        activation,
        hidden,
        output_norm,
        u: limits.clamp(output_norm * norm.output_scale),
    }
}

/// One sign-surrogate gradient step on the weights, using the intermediates
/// of the forward pass for the same sample.
pub fn learn(
    weights: &mut PidnnWeights,
    pass: &ForwardPass,
    norm: &Normalization,
    cfg: &LearnConfig,
    setpoint: f64,
    feedback: f64,
) {
    if !cfg.enabled || cfg.rate == 0.0 {
        return;
    }
    let delta = (setpoint - feedback) / norm.input_scale * cfg.plant_sign.value();
    let step = cfg.rate * delta;
    let limit = cfg.weight_limit;
    let output = weights.output;

    for (w, x) in weights.output.iter_mut().zip(&pass.hidden) {
        *w = (*w + step * x).clamp(-limit, limit);
    }
    for (j, row) in weights.hidden.iter_mut().enumerate() {
        // every hidden neuron has unit slope inside its linear range
        if pass.saturated(j) {
            continue;
        }
        for (w, x) in row.iter_mut().zip(&pass.inputs) {
            *w = (*w + step * output[j] * x).clamp(-limit, limit);
        }
    }
}

/// A PIDNN speed controller: weights, memories, scaling and learning rule.
#[derive(Debug, Clone)]
pub struct Pidnn {
    pub weights: PidnnWeights,
    pub state: PidnnState,
    pub norm: Normalization,
    pub limits: OutputLimits,
    pub learn: LearnConfig,
    initial: PidnnWeights,
}

impl Pidnn {
    pub const PRESETS: &'static [&'static str] = &["default"];

    pub fn new(
        weights: PidnnWeights,
        norm: Normalization,
        limits: OutputLimits,
        learn: LearnConfig,
    ) -> Self {
        Pidnn {
            weights,
            state: PidnnState::default(),
            norm,
            limits,
            learn,
            initial: weights,
        }
    }

    /// Builds a controller from a named preset.
    ///
    /// `default`: hidden rows `(+1, −1)`, output weights `(7.5, 0.17, 5.0)`,
    /// inputs normalized by 50 V and the output scaled by 20 V. In PID terms
    /// at `Ts = 10 ms` this starts out as `kp = 3`, `ki = 6.8 s⁻¹`,
    /// `kd = 0.02 s`, with ±3.4 V of integral authority before the I neuron
    /// saturates.
    pub fn preset(name: &str, limits: OutputLimits, learn: LearnConfig) -> Result<Self> {
        learn.validate()?;
        match name {
            "default" => Ok(Pidnn::new(
                PidnnWeights::error_rows([7.5, 0.17, 5.0]),
                Normalization {
                    input_scale: 50.0,
                    output_scale: 20.0,
                },
                limits,
                learn,
            )),
            other => Err(Error::UnknownPreset(other.to_string())),
        }
    }

    /// Evaluates the network and advances the neuron memories.
    pub fn forward(&mut self, setpoint: f64, feedback: f64) -> Result<ForwardPass> {
        ensure_finite(setpoint, "setpoint")?;
        ensure_finite(feedback, "measurement")?;
        let pass = forward(
            &self.weights,
            &self.state,
            &self.norm,
            &self.limits,
            setpoint,
            feedback,
        );
        self.state.integral = pass.hidden[1];
        self.state.derivative_input = pass.net[2];
        Ok(pass)
    }

    pub fn learn(&mut self, pass: &ForwardPass, setpoint: f64, feedback: f64) {
        learn(
            &mut self.weights,
            pass,
            &self.norm,
            &self.learn,
            setpoint,
            feedback,
        );
    }

    /// Clears memories and restores the initial weights.
    pub fn restart(&mut self) {
        self.state = PidnnState::default();
        self.weights = self.initial;
    }
}

impl Controller for Pidnn {
    fn update(&mut self, io: ControllerIo) -> Result<f64> {
        let pass = self.forward(io.setpoint, io.measurement)?;
        self.learn(&pass, io.setpoint, io.measurement);
        Ok(pass.u)
    }

    fn reset(&mut self) {
        self.state = PidnnState::default();
    }

    fn weights(&self) -> Option<PidnnWeights> {
        Some(self.weights)
    }
}
