//! Closed-loop speed control of a DC servo: an FOPDT plant model, a classic
//! positional PID, a 3-3-1 PID neural network with online learning, a
//! scenario engine and step-response metrics.
//!
//! The [`cli`] module holds the config grammar, trace CSV format, SVG plots
//! and the `run`/`compare`/`metrics` commands behind the `servo-pidnn`
//! binary.

pub mod cli;
pub mod controllers;
pub mod error;
pub mod metrics;
pub mod pidnn;
pub mod plant;
pub mod simloop;

pub use controllers::{Controller, ControllerIo, OutputLimits, Pid, PidGains};
pub use error::{Error, Result};
pub use metrics::{segment_metrics, StepMetrics};
pub use pidnn::{LearnConfig, Normalization, Pidnn, PidnnState, PidnnWeights, PlantSign};
pub use plant::{FopdtModel, FopdtPlant, SensorGain, ServoPlant};
pub use simloop::{
    run_comparison, run_scenario, BuiltinParams, ControllerKind, ControllerSpec, Profile, Scenario,
    Segment, SimSettings, Trace, TraceRow,
};
