//! Run configuration files.
//!
//! TOML with a fixed set of keys; anything else is rejected. Only `scenario`
//! and `controller` (or `controllers`) are required:
//!
//! ```toml
//! scenario = "step200"             # builtin name, or path to a scenario file
//! controllers = ["pidnn", "pid-kuhn", "pid-unit"]
//! band_pct = 2.0
//! out_dir = "out"
//!
//! [plant]
//! gain_Ks = 0.946
//! time_constant_T = 0.4425
//! dead_time_L = 0.0325
//!
//! [sim]
//! period_Ts = 0.01
//! sub_step_h = 0.0005
//! rpm_per_volt = 200.0
//! u_min = -10.0
//! u_max = 10.0
//!
//! [builtin]
//! duration = 20.0
//! step_rpm = 200.0
//! staircase = [[0.0, 200.0], [8.0, 300.0], [14.0, 150.0]]
//! load_time = 10.0
//! load_volts = -0.3
//!
//! [pid.slow]
//! kp = 0.5
//! ki = 1.0
//! kd = 0.0
//!
//! [pidnn.fast]
//! preset = "default"
//! rate_eta = 0.05
//! plant_sign = 1
//! learn = true
//! weight_limit = 10.0
//! norm_scale_r = 50.0
//! norm_scale_u = 20.0
//! ```
//!
//! A scenario file holds `name` (optional), `duration`, `setpoint_rpm` and
//! optionally `disturbance_v`, each profile a list of `[t_start, value]`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::controllers::{OutputLimits, PidGains};
use crate::metrics::DEFAULT_BAND_PCT;
use crate::pidnn::{LearnConfig, Normalization, Pidnn, PlantSign};
use crate::plant::{FopdtModel, FopdtPlant, SensorGain};
use crate::simloop::{
    BuiltinParams, ControllerKind, ControllerSpec, Profile, Scenario, SimSettings,
};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("missing required keys: {}", .0.join(", "))]
    Missing(Vec<&'static str>),

    #[error("{0}")]
    Invalid(String),

    #[error("{path}: {message}")]
    File { path: PathBuf, message: String },
}

impl From<crate::Error> for ConfigError {
    fn from(e: crate::Error) -> Self {
        ConfigError::Invalid(e.to_string())
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: Option<String>,
    controller: Option<String>,
    controllers: Option<Vec<String>>,
    band_pct: Option<f64>,
    out_dir: Option<String>,
    #[serde(default)]
    plant: RawPlant,
    #[serde(default)]
    sim: RawSim,
    #[serde(default)]
    builtin: RawBuiltin,
    #[serde(default)]
    pid: BTreeMap<String, RawPid>,
    #[serde(default)]
    pidnn: BTreeMap<String, RawPidnn>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct RawPlant {
    gain_Ks: Option<f64>,
    time_constant_T: Option<f64>,
    dead_time_L: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct RawSim {
    period_Ts: Option<f64>,
    sub_step_h: Option<f64>,
    rpm_per_volt: Option<f64>,
    u_min: Option<f64>,
    u_max: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBuiltin {
    duration: Option<f64>,
    step_rpm: Option<f64>,
    staircase: Option<Vec<[f64; 2]>>,
    load_time: Option<f64>,
    load_volts: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPid {
    kp: f64,
    ki: f64,
    kd: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPidnn {
    preset: Option<String>,
    rate_eta: Option<f64>,
    plant_sign: Option<f64>,
    learn: Option<bool>,
    weight_limit: Option<f64>,
    norm_scale_r: Option<f64>,
    norm_scale_u: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenarioFile {
    name: Option<String>,
    duration: f64,
    setpoint_rpm: Vec<[f64; 2]>,
    disturbance_v: Option<Vec<[f64; 2]>>,
}

/// A fully validated run description with defaults applied.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub controllers: Vec<ControllerSpec>,
    pub settings: SimSettings,
    pub band_pct: f64,
    pub out_dir: PathBuf,
}

fn syntax_error(text: &str, err: &toml::de::Error) -> ConfigError {
    let line = err
        .span()
        .map(|span| text[..span.start.min(text.len())].matches('\n').count() + 1)
        .unwrap_or(1);
    ConfigError::Syntax {
        line,
        message: err.message().trim().to_string(),
    }
}

fn positive(value: f64, field: &str) -> Result<f64, ConfigError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(ConfigError::Invalid(format!("{field} must be > 0")))
    }
}

fn preset_norm(preset: &str) -> Result<Normalization, ConfigError> {
    Ok(Pidnn::preset(preset, OutputLimits::default(), LearnConfig::default())?.norm)
}

fn pairs(points: &[[f64; 2]]) -> Vec<(f64, f64)> {
    points.iter().map(|&[t, v]| (t, v)).collect()
}

/// Parses config text; scenario file paths resolve against the working
/// directory.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_config_in(text, Path::new("."))
}

/// Reads and parses a config file; scenario paths resolve against the
/// file's directory.
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::File {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config_in(&text, base)
}

pub fn parse_config_in(text: &str, base_dir: &Path) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| syntax_error(text, &e))?;

    let mut missing = Vec::new();
    if raw.scenario.is_none() {
        missing.push("scenario");
    }
    if raw.controller.is_none() && raw.controllers.is_none() {
        missing.push("controller");
    }
    if !missing.is_empty() {
        return Err(ConfigError::Missing(missing));
    }

    let defaults = SimSettings::default();
    let model = FopdtModel::new(
        raw.plant.gain_Ks.unwrap_or(FopdtModel::SERVO_SPEED.gain),
        raw.plant
            .time_constant_T
            .unwrap_or(FopdtModel::SERVO_SPEED.time_constant),
        raw.plant
            .dead_time_L
            .unwrap_or(FopdtModel::SERVO_SPEED.dead_time),
    )?;
    let period = positive(raw.sim.period_Ts.unwrap_or(defaults.period), "period_Ts")?;
    let sub_step = positive(
        raw.sim.sub_step_h.unwrap_or(defaults.sub_step),
        "sub_step_h",
    )?;
    let sensor = SensorGain::new(
        raw.sim
            .rpm_per_volt
            .unwrap_or(SensorGain::SERVO.rpm_per_volt()),
    )?;
    let limits = OutputLimits::new(
        raw.sim.u_min.unwrap_or(defaults.limits.min),
        raw.sim.u_max.unwrap_or(defaults.limits.max),
    )?;
    let settings = SimSettings {
        model,
        sensor,
        period,
        sub_step,
        limits,
        record_weights: false,
    };
    settings.sub_steps()?;
    FopdtPlant::new(model, sub_step)?;

    let band_pct = positive(raw.band_pct.unwrap_or(DEFAULT_BAND_PCT), "band_pct")?;

    let builtin_defaults = BuiltinParams::default();
    let params = BuiltinParams {
        duration: raw.builtin.duration.unwrap_or(builtin_defaults.duration),
        step_rpm: raw.builtin.step_rpm.unwrap_or(builtin_defaults.step_rpm),
        staircase: raw
            .builtin
            .staircase
            .as_deref()
            .map(pairs)
            .unwrap_or(builtin_defaults.staircase),
        load_time: raw.builtin.load_time.unwrap_or(builtin_defaults.load_time),
        load_volts: raw
            .builtin
            .load_volts
            .unwrap_or(builtin_defaults.load_volts),
    };
    let scenario_ref = raw.scenario.expect("checked above");
    let scenario = if Scenario::BUILTINS.contains(&scenario_ref.as_str()) {
        Scenario::builtin(&scenario_ref, &params)?
    } else {
        load_scenario(&base_dir.join(&scenario_ref))?
    };

    let names = match (raw.controller, raw.controllers) {
        (Some(_), Some(_)) => {
            return Err(ConfigError::Invalid(
                "use either controller or controllers, not both".into(),
            ))
        }
        (Some(one), None) => vec![one],
        (None, Some(list)) => list,
        (None, None) => unreachable!("checked above"),
    };
    if names.is_empty() {
        return Err(ConfigError::Invalid("controllers must not be empty".into()));
    }

    let mut custom: BTreeMap<String, ControllerKind> = BTreeMap::new();
    for (name, pid) in &raw.pid {
        let gains = PidGains::new(pid.kp, pid.ki, pid.kd)?;
        custom.insert(name.clone(), ControllerKind::Pid(gains));
    }
    for (name, nn) in &raw.pidnn {
        if custom.contains_key(name) {
            return Err(ConfigError::Invalid(format!(
                "controller '{name}' is defined twice"
            )));
        }
        let preset = nn.preset.clone().unwrap_or_else(|| "default".into());
        if !Pidnn::PRESETS.contains(&preset.as_str()) {
            return Err(crate::Error::UnknownPreset(preset).into());
        }
        let plant_sign = match nn.plant_sign.unwrap_or(1.0) {
            1.0 => PlantSign::Positive,
            -1.0 => PlantSign::Negative,
            s => {
                return Err(ConfigError::Invalid(format!(
                    "plant_sign must be 1 or -1, found {s}"
                )))
            }
        };
        let learn = LearnConfig {
            rate: nn.rate_eta.unwrap_or(LearnConfig::DEFAULT_RATE),
            plant_sign,
            enabled: nn.learn.unwrap_or(true),
            weight_limit: nn.weight_limit.unwrap_or(LearnConfig::DEFAULT_WEIGHT_LIMIT),
        };
        learn.validate()?;
        let norm = match (nn.norm_scale_r, nn.norm_scale_u) {
            (None, None) => None,
            (r, u) => {
                let base = preset_norm(&preset)?;
                Some(Normalization::new(
                    r.unwrap_or(base.input_scale),
                    u.unwrap_or(base.output_scale),
                )?)
            }
        };
        custom.insert(
            name.clone(),
            ControllerKind::Pidnn {
                preset,
                learn,
                norm,
            },
        );
    }
    if let Some(name) = custom
        .keys()
        .find(|n| ControllerSpec::BUILTINS.contains(&n.as_str()))
    {
        return Err(ConfigError::Invalid(format!(
            "controller '{name}' shadows a builtin controller"
        )));
    }

    let controllers = names
        .iter()
        .map(|name| match custom.get(name) {
            Some(kind) => Ok(ControllerSpec {
                name: name.clone(),
                kind: kind.clone(),
            }),
            None => ControllerSpec::builtin(name).map_err(ConfigError::from),
        })
        .collect::<Result<Vec<_>, _>>()?;

    Ok(RunConfig {
        scenario,
        controllers,
        settings,
        band_pct,
        out_dir: PathBuf::from(raw.out_dir.unwrap_or_else(|| "out".into())),
    })
}

/// Loads a scenario description file.
pub fn load_scenario(path: &Path) -> Result<Scenario, ConfigError> {
    let file_err = |message: String| ConfigError::File {
        path: path.to_path_buf(),
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| {
        file_err(format!(
            "{e} (scenario is neither a builtin ({}) nor a readable file)",
            Scenario::BUILTINS.join(", ")
        ))
    })?;
    let raw: RawScenarioFile =
        toml::from_str(&text).map_err(|e| match syntax_error(&text, &e) {
            ConfigError::Syntax { line, message } => file_err(format!("line {line}: {message}")),
            other => other,
        })?;
    let name = raw.name.unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scenario".into())
    });
    let disturbance = match raw.disturbance_v {
        Some(points) => Profile::new(pairs(&points)),
        None => Ok(Profile::constant(0.0)),
    }
    .map_err(|e| file_err(e.to_string()))?;
    let setpoint = Profile::new(pairs(&raw.setpoint_rpm)).map_err(|e| file_err(e.to_string()))?;
    Scenario::new(name, raw.duration, setpoint, disturbance).map_err(|e| file_err(e.to_string()))
}

fn profile_literal(profile: &Profile) -> String {
    let items: Vec<String> = profile
        .points()
        .iter()
        .map(|(t, v)| format!("[{t:?}, {v:?}]"))
        .collect();
    format!("[{}]", items.join(", "))
}

impl RunConfig {
    /// Renders the resolved configuration, defaults included, in a stable
    /// form.
    pub fn to_canonical(&self) -> String {
        let s = &self.settings;
        let mut out = String::new();
        let _ = writeln!(out, "band_pct = {:?}", self.band_pct);
        let _ = writeln!(out, "out_dir = {:?}", self.out_dir.display().to_string());
        let _ = writeln!(out, "\n[plant]");
        let _ = writeln!(out, "gain_Ks = {:?}", s.model.gain);
        let _ = writeln!(out, "time_constant_T = {:?}", s.model.time_constant);
        let _ = writeln!(out, "dead_time_L = {:?}", s.model.dead_time);
        let _ = writeln!(out, "\n[sim]");
        let _ = writeln!(out, "period_Ts = {:?}", s.period);
        let _ = writeln!(out, "sub_step_h = {:?}", s.sub_step);
        let _ = writeln!(out, "rpm_per_volt = {:?}", s.sensor.rpm_per_volt());
        let _ = writeln!(out, "u_min = {:?}", s.limits.min);
        let _ = writeln!(out, "u_max = {:?}", s.limits.max);
        let _ = writeln!(out, "\n[scenario]");
        let _ = writeln!(out, "name = {:?}", self.scenario.name);
        let _ = writeln!(out, "duration = {:?}", self.scenario.duration);
        let _ = writeln!(
            out,
            "setpoint_rpm = {}",
            profile_literal(&self.scenario.setpoint)
        );
        let _ = writeln!(
            out,
            "disturbance_v = {}",
            profile_literal(&self.scenario.disturbance)
        );
        for spec in &self.controllers {
            let _ = writeln!(out, "\n[[controller]]");
            let _ = writeln!(out, "name = {:?}", spec.name);
            match &spec.kind {
                ControllerKind::Pid(g) => {
                    let _ = writeln!(out, "kind = \"pid\"");
                    let _ = writeln!(out, "kp = {:?}", g.kp);
                    let _ = writeln!(out, "ki = {:?}", g.ki);
                    let _ = writeln!(out, "kd = {:?}", g.kd);
                }
                ControllerKind::Pidnn {
                    preset,
                    learn,
                    norm,
                } => {
                    let norm = norm
                        .or_else(|| preset_norm(preset).ok())
                        .expect("preset validated at parse time");
                    let _ = writeln!(out, "kind = \"pidnn\"");
                    let _ = writeln!(out, "preset = {preset:?}");
                    let _ = writeln!(out, "rate_eta = {:?}", learn.rate);
                    let _ = writeln!(out, "plant_sign = {:?}", learn.plant_sign.value());
                    let _ = writeln!(out, "learn = {}", learn.enabled);
                    let _ = writeln!(out, "weight_limit = {:?}", learn.weight_limit);
                    let _ = writeln!(out, "norm_scale_r = {:?}", norm.input_scale);
                    let _ = writeln!(out, "norm_scale_u = {:?}", norm.output_scale);
                }
            }
        }
        out
    }
}
