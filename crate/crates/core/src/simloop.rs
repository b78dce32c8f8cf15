//! Closed-loop scenario engine.
//!
//! Setpoint profile → controller at `Ts` → zero-order hold → plant on fine
//! sub-steps → speed sensor → back to the controller. Time is always an
//! integer sample index times `Ts`.

use std::thread;

use crate::controllers::{Controller, ControllerIo, OutputLimits, Pid, PidGains};
use crate::error::{Error, Result};
use crate::pidnn::{LearnConfig, Normalization, Pidnn, PidnnWeights};
use crate::plant::{whole_ratio, FopdtModel, FopdtPlant, SensorGain, ServoPlant};

/// Tolerance, in samples, when snapping profile times onto the grid.
const GRID_EPS: f64 = 1e-9;

fn grid_index(t: f64, period: f64) -> usize {
    (t / period - GRID_EPS).ceil().max(0.0) as usize
}

/// A piecewise-constant signal given as `(t_start, value)` breakpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    points: Vec<(f64, f64)>,
}

impl Profile {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        let Some(&(first, _)) = points.first() else {
            return Err(Error::InvalidProfile("profile has no breakpoints".into()));
        };
        if first != 0.0 {
            return Err(Error::InvalidProfile(format!(
                "first breakpoint must start at t = 0, found {first}"
            )));
        }
        if points.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(Error::InvalidProfile("non-finite breakpoint".into()));
        }
        if let Some(w) = points.windows(2).find(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidProfile(format!(
                "breakpoints must be strictly increasing in time ({} then {})",
                w[0].0, w[1].0
            )));
        }
        Ok(Profile { points })
    }

    pub fn constant(value: f64) -> Self {
        Profile {
            points: vec![(0.0, value)],
        }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Value held at sample `k`.
    pub fn value_at(&self, k: usize, period: f64) -> f64 {
        self.points
            .iter()
            .rev()
            .find(|(t, _)| grid_index(*t, period) <= k)
            .map(|&(_, v)| v)
            .unwrap_or(self.points[0].1)
    }
}

/// Parameters of the builtin scenarios that are not fixed by the experiment
/// description.
#[derive(Debug, Clone, PartialEq)]
pub struct BuiltinParams {
    pub duration: f64,
    pub step_rpm: f64,
    /// Setpoint breakpoints of `staircase`, `(t_start, rpm)`.
    pub staircase: Vec<(f64, f64)>,
    pub load_time: f64,
    pub load_volts: f64,
}

impl Default for BuiltinParams {
    fn default() -> Self {
        BuiltinParams {
            duration: 20.0,
            step_rpm: 200.0,
            staircase: vec![(0.0, 200.0), (8.0, 300.0), (14.0, 150.0)],
            load_time: 10.0,
            load_volts: -0.3,
        }
    }
}

/// A deterministic experiment: setpoint in RPM and input disturbance in volts.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub duration: f64,
    pub setpoint: Profile,
    pub disturbance: Profile,
}

/// A response window with a fixed target, used for metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub t_from: f64,
    pub t_to: f64,
    pub target: f64,
}

impl Scenario {
    pub const BUILTINS: &'static [&'static str] = &["step200", "staircase", "loadchange"];

    pub fn new(
        name: impl Into<String>,
        duration: f64,
        setpoint: Profile,
        disturbance: Profile,
    ) -> Result<Self> {
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::invalid("duration", "must be > 0"));
        }
        Ok(Scenario {
            name: name.into(),
            duration,
            setpoint,
            disturbance,
        })
    }

    pub fn builtin(name: &str, params: &BuiltinParams) -> Result<Self> {
        match name {
            "step200" => Scenario::new(
                name,
                params.duration,
                Profile::constant(params.step_rpm),
                Profile::constant(0.0),
            ),
            "staircase" => Scenario::new(
                name,
                params.duration,
                Profile::new(params.staircase.clone())?,
                Profile::constant(0.0),
            ),
            "loadchange" => Scenario::new(
                name,
                params.duration,
                Profile::constant(params.step_rpm),
                Profile::new(vec![(0.0, 0.0), (params.load_time, params.load_volts)])?,
            ),
            other => Err(Error::UnknownScenario(other.to_string())),
        }
    }

    /// `floor(duration / Ts) + 1`.
    pub fn sample_count(&self, period: f64) -> usize {
        (self.duration / period + GRID_EPS).floor() as usize + 1
    }

    /// Splits the run at every setpoint or disturbance change. Each segment
    /// runs up to the sample before the next change; the target is the
    /// setpoint held over it.
    pub fn segments(&self, period: f64) -> Vec<Segment> {
        let last = self.sample_count(period) - 1;
        let mut starts: Vec<usize> = self
            .setpoint
            .points()
            .iter()
            .chain(self.disturbance.points())
            .map(|&(t, _)| grid_index(t, period))
            .filter(|&k| k <= last)
            .collect();
        starts.sort_unstable();
        starts.dedup();
        starts
            .iter()
            .enumerate()
            .map(|(i, &k0)| {
                let k1 = starts.get(i + 1).map_or(last, |&next| next - 1);
                Segment {
                    t_from: k0 as f64 * period,
                    t_to: k1 as f64 * period,
                    target: self.setpoint.value_at(k0, period),
                }
            })
            .collect()
    }
}

/// Which controller to put in the loop.
#[derive(Debug, Clone, PartialEq)]
pub enum ControllerKind {
    Pid(PidGains),
    Pidnn {
        preset: String,
        learn: LearnConfig,
        /// Replaces the preset's scaling when set.
        norm: Option<Normalization>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerSpec {
    pub name: String,
    pub kind: ControllerKind,
}

impl ControllerSpec {
    pub const BUILTINS: &'static [&'static str] = &["pidnn", "pidnn-fixed", "pid-kuhn", "pid-unit"];

    pub fn builtin(name: &str) -> Result<Self> {
        let kind = match name {
            "pidnn" => ControllerKind::Pidnn {
                preset: "default".into(),
                learn: LearnConfig::default(),
                norm: None,
            },
            "pidnn-fixed" => ControllerKind::Pidnn {
                preset: "default".into(),
                learn: LearnConfig::disabled(),
                norm: None,
            },
            "pid-kuhn" => ControllerKind::Pid(PidGains::KUHN),
            "pid-unit" => ControllerKind::Pid(PidGains::UNIT),
            other => return Err(Error::UnknownController(other.to_string())),
        };
        Ok(ControllerSpec {
            name: name.to_string(),
            kind,
        })
    }

    pub fn build(&self, period: f64, limits: OutputLimits) -> Result<Box<dyn Controller>> {
        Ok(match &self.kind {
            ControllerKind::Pid(gains) => Box::new(Pid::new(*gains, period, limits)?),
            ControllerKind::Pidnn {
                preset,
                learn,
                norm,
            } => {
                let mut net = Pidnn::preset(preset, limits, *learn)?;
                if let Some(norm) = norm {
                    net.norm = *norm;
                }
                Box::new(net)
            }
        })
    }
}

/// Loop timing, plant and sensor used for every run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSettings {
    pub model: FopdtModel,
    pub sensor: SensorGain,
    pub period: f64,
    pub sub_step: f64,
    pub limits: OutputLimits,
    /// Keep a weight snapshot per sample for controllers that have weights.
    pub record_weights: bool,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            model: FopdtModel::SERVO_SPEED,
            sensor: SensorGain::SERVO,
            period: 0.01,
            sub_step: 0.0005,
            limits: OutputLimits::default(),
            record_weights: false,
        }
    }
}

impl SimSettings {
    /// Sub-steps per control period.
    pub fn sub_steps(&self) -> Result<usize> {
        if !(self.period.is_finite() && self.period > 0.0) {
            return Err(Error::invalid("period_Ts", "must be > 0"));
        }
        if !(self.sub_step.is_finite() && self.sub_step > 0.0) {
            return Err(Error::invalid("sub_step_h", "must be > 0"));
        }
        match whole_ratio(self.period, self.sub_step) {
            Some(n) if n > 0 => Ok(n),
            _ => Err(Error::PeriodNotMultiple {
                period: self.period,
                sub_step: self.sub_step,
            }),
        }
    }
}

/// One control instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub setpoint: f64,
    pub speed: f64,
    pub control: f64,
    pub error: f64,
}

/// Sampled closed-loop record of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub scenario: String,
    pub controller: String,
    pub rows: Vec<TraceRow>,
    /// Weight snapshot after each sample; empty unless recorded.
    pub weights: Vec<PidnnWeights>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn speeds(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.speed).collect()
    }

    /// Sample period, inferred from the first two rows.
    pub fn period(&self) -> Option<f64> {
        match self.rows.as_slice() {
            [a, b, ..] => Some(b.t - a.t),
            _ => None,
        }
    }

    /// Segments split at every setpoint change in the trace.
    pub fn setpoint_segments(&self) -> Vec<Segment> {
        let mut segments: Vec<Segment> = Vec::new();
        for row in &self.rows {
            match segments.last_mut() {
                Some(seg) if seg.target == row.setpoint => seg.t_to = row.t,
                _ => segments.push(Segment {
                    t_from: row.t,
                    t_to: row.t,
                    target: row.setpoint,
                }),
            }
        }
        segments
    }
}

/// Runs `controller` against any plant backend. The plant must start at rest.
pub fn run_loop<P: ServoPlant>(
    scenario: &Scenario,
    controller: &mut dyn Controller,
    plant: &mut P,
    settings: &SimSettings,
) -> Result<(Vec<TraceRow>, Vec<PidnnWeights>)> {
    let sub_steps = settings.sub_steps()?;
    let period = settings.period;
    let n = scenario.sample_count(period);
    let mut rows = Vec::with_capacity(n);
    let mut weights = Vec::new();

    for k in 0..n {
        let setpoint = scenario.setpoint.value_at(k, period);
        let y = plant.output();
        let io = ControllerIo::new(settings.sensor.rpm_to_volts(setpoint), y);
        let u = controller.update(io)?;
        let speed = settings.sensor.volts_to_rpm(y);
        rows.push(TraceRow {
            t: k as f64 * period,
            setpoint,
            speed,
            control: u,
            error: setpoint - speed,
        });
        if settings.record_weights {
            if let Some(w) = controller.weights() {
                weights.push(w);
            }
        }
        if k + 1 < n {
            let d = scenario.disturbance.value_at(k, period);
            plant.hold(u, d, sub_steps)?;
        }
    }
    Ok((rows, weights))
}

/// Runs one controller on a fresh simulated plant.
pub fn run_scenario(
    scenario: &Scenario,
    spec: &ControllerSpec,
    settings: &SimSettings,
) -> Result<Trace> {
    settings.sub_steps()?;
    let mut plant = FopdtPlant::new(settings.model, settings.sub_step)?;
    let mut controller = spec.build(settings.period, settings.limits)?;
    let (rows, weights) = run_loop(scenario, controller.as_mut(), &mut plant, settings)?;
    Ok(Trace {
        scenario: scenario.name.clone(),
        controller: spec.name.clone(),
        rows,
        weights,
    })
}

/// Runs every controller on the same scenario, in parallel, returning the
/// traces in input order.
pub fn run_comparison(
    scenario: &Scenario,
    specs: &[ControllerSpec],
    settings: &SimSettings,
) -> Result<Vec<Trace>> {
    thread::scope(|scope| {
        let handles: Vec<_> = specs
            .iter()
            .map(|spec| scope.spawn(move || run_scenario(scenario, spec, settings)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect()
    })
}
