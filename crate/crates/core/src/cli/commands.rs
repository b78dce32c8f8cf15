//! `run`, `compare` and `metrics` commands.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::config::{ConfigError, RunConfig};
use super::svg::{line_plot, Series};
use super::trace_csv::{self, format_number, TraceCsvError};
use crate::metrics::{metrics_for, StepMetrics};
use crate::simloop::{run_comparison, run_scenario, Segment, SimSettings, Trace};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),

    #[error("simulation error: {0}")]
    Sim(#[from] crate::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Trace {
        path: PathBuf,
        source: TraceCsvError,
    },
}

impl CliError {
    /// 2 for configuration problems, 3 for everything that fails at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 3,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn trace_err(path: &Path) -> impl FnOnce(TraceCsvError) -> CliError + '_ {
    move |source| CliError::Trace {
        path: path.to_path_buf(),
        source,
    }
}

/// Where and what to write.
#[derive(Debug, Clone)]
pub struct OutputOptions {
    pub out_dir: PathBuf,
    pub dump_weights: bool,
    pub plot: bool,
}

impl OutputOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        OutputOptions {
            out_dir: out_dir.into(),
            dump_weights: false,
            plot: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub controller: String,
    pub segment: Segment,
    pub metrics: StepMetrics,
}

/// Rows are controllers (one per segment), columns the quality indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsTable {
    pub rows: Vec<MetricsRow>,
}

impl MetricsTable {
    pub const CSV_HEADER: &'static str =
        "controller,t_from_s,t_to_s,target_rpm,overshoot_pct,settling_time_s,sse_rpm,band_pct";

    pub fn for_trace(trace: &Trace, segments: &[Segment], band_pct: f64) -> crate::Result<Self> {
        let rows = segments
            .iter()
            .map(|segment| {
                Ok(MetricsRow {
                    controller: trace.controller.clone(),
                    segment: *segment,
                    metrics: metrics_for(trace, segment, band_pct)?,
                })
            })
            .collect::<crate::Result<Vec<_>>>()?;
        Ok(MetricsTable { rows })
    }

    pub fn extend(&mut self, other: MetricsTable) {
        self.rows.extend(other.rows);
    }

    pub fn to_text(&self) -> String {
        let width = self
            .rows
            .iter()
            .map(|r| r.controller.len())
            .max()
            .unwrap_or(0)
            .max("controller".len());
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:>8}  {:>8}  {:>10}  {:>13}  {:>15}  {:>10}  {:>8}",
            "controller",
            "from_s",
            "to_s",
            "target_rpm",
            "overshoot_pct",
            "settling_time_s",
            "sse_rpm",
            "band_pct"
        );
        for r in &self.rows {
            let settling = r
                .metrics
                .settling_time
                .map_or_else(|| "unsettled".to_string(), |t| format!("{t:.2}"));
            let _ = writeln!(
                out,
                "{:<width$}  {:>8.2}  {:>8.2}  {:>10.1}  {:>13.3}  {:>15}  {:>10.4}  {:>8}",
                r.controller,
                r.segment.t_from,
                r.segment.t_to,
                r.segment.target,
                r.metrics.overshoot_pct,
                settling,
                r.metrics.steady_state_error,
                format_number(r.metrics.band_pct)
            );
        }
        out
    }

    /// Unsettled segments leave `settling_time_s` empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let settling = r
                .metrics
                .settling_time
                .map(format_number)
                .unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.controller,
                format_number(r.segment.t_from),
                format_number(r.segment.t_to),
                format_number(r.segment.target),
                format_number(r.metrics.overshoot_pct),
                settling,
                format_number(r.metrics.steady_state_error),
                format_number(r.metrics.band_pct)
            );
        }
        out
    }
}

/// Files written by a command plus the metrics it reports.
#[derive(Debug, Clone)]
pub struct CommandReport {
    pub files: Vec<PathBuf>,
    pub table: MetricsTable,
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn write_file(path: &Path, contents: &str) -> Result<PathBuf, CliError> {
    fs::write(path, contents).map_err(io_err(path))?;
    Ok(path.to_path_buf())
}

fn write_trace_files(
    trace: &Trace,
    dir: &Path,
    dump_weights: bool,
) -> Result<Vec<PathBuf>, CliError> {
    let stem = format!(
        "{}_{}",
        file_stem(&trace.scenario),
        file_stem(&trace.controller)
    );
    let mut files = Vec::new();

    let path = dir.join(format!("{stem}.csv"));
    let file = File::create(&path).map_err(io_err(&path))?;
    trace_csv::write_trace(BufWriter::new(file), trace).map_err(trace_err(&path))?;
    files.push(path);

    if dump_weights && !trace.weights.is_empty() {
        let path = dir.join(format!("{stem}.weights.csv"));
        let file = File::create(&path).map_err(io_err(&path))?;
        trace_csv::write_weights(BufWriter::new(file), trace).map_err(trace_err(&path))?;
        files.push(path);
    }
    Ok(files)
}

fn plot_traces(title: &str, traces: &[Trace]) -> String {
    let mut series = Vec::with_capacity(traces.len() + 1);
    if let Some(first) = traces.first() {
        series.push(Series {
            label: "setpoint",
            points: first.rows.iter().map(|r| (r.t, r.setpoint)).collect(),
            dashed: true,
        });
    }
    for trace in traces {
        series.push(Series {
            label: &trace.controller,
            points: trace.rows.iter().map(|r| (r.t, r.speed)).collect(),
            dashed: false,
        });
    }
    line_plot(title, "time (s)", "speed (RPM)", &series)
}

fn prepare(cfg: &RunConfig, opts: &OutputOptions) -> Result<SimSettings, CliError> {
    fs::create_dir_all(&opts.out_dir).map_err(io_err(&opts.out_dir))?;
    Ok(SimSettings {
        record_weights: opts.dump_weights,
        ..cfg.settings
    })
}

/// Simulates the single configured controller and writes its trace CSV and
/// an SVG of setpoint and speed.
pub fn cmd_run(cfg: &RunConfig, opts: &OutputOptions) -> Result<CommandReport, CliError> {
    let [spec] = cfg.controllers.as_slice() else {
        return Err(ConfigError::Invalid(format!(
            "run expects exactly one controller, found {}; use compare for several",
            cfg.controllers.len()
        ))
        .into());
    };
    let settings = prepare(cfg, opts)?;
    let trace = trace_csv::quantize(&run_scenario(&cfg.scenario, spec, &settings)?);
    let segments = cfg.scenario.segments(settings.period);
    let table = MetricsTable::for_trace(&trace, &segments, cfg.band_pct)?;

    let mut files = write_trace_files(&trace, &opts.out_dir, opts.dump_weights)?;
    if opts.plot {
        let stem = format!(
            "{}_{}",
            file_stem(&trace.scenario),
            file_stem(&trace.controller)
        );
        let title = format!("{} / {}", trace.scenario, trace.controller);
        files.push(write_file(
            &opts.out_dir.join(format!("{stem}.svg")),
            &plot_traces(&title, std::slice::from_ref(&trace)),
        )?);
    }
    Ok(CommandReport { files, table })
}

/// Runs every configured controller on the scenario and writes one CSV per
/// controller, an overlay SVG and the metrics table as text and CSV.
pub fn cmd_compare(cfg: &RunConfig, opts: &OutputOptions) -> Result<CommandReport, CliError> {
    let settings = prepare(cfg, opts)?;
    let traces: Vec<Trace> = run_comparison(&cfg.scenario, &cfg.controllers, &settings)?
        .iter()
        .map(trace_csv::quantize)
        .collect();
    let segments = cfg.scenario.segments(settings.period);

    let mut table = MetricsTable::default();
    for trace in &traces {
        table.extend(MetricsTable::for_trace(trace, &segments, cfg.band_pct)?);
    }

    let mut files = Vec::new();
    for trace in &traces {
        files.extend(write_trace_files(trace, &opts.out_dir, opts.dump_weights)?);
    }
    let stem = file_stem(&cfg.scenario.name);
    if opts.plot {
        files.push(write_file(
            &opts.out_dir.join(format!("{stem}_compare.svg")),
            &plot_traces(&cfg.scenario.name, &traces),
        )?);
    }
    files.push(write_file(
        &opts.out_dir.join(format!("{stem}_metrics.txt")),
        &table.to_text(),
    )?);
    files.push(write_file(
        &opts.out_dir.join(format!("{stem}_metrics.csv")),
        &table.to_csv(),
    )?);
    Ok(CommandReport { files, table })
}

/// Splits `segments` further at each time in `splits`.
fn split_segments(segments: &[Segment], splits: &[f64], period: f64) -> Vec<Segment> {
    let eps = period * 1e-6;
    let mut out = Vec::new();
    for seg in segments {
        let mut current = *seg;
        let mut cuts: Vec<f64> = splits
            .iter()
            .copied()
            .filter(|&t| t > seg.t_from + eps && t <= seg.t_to + eps)
            .collect();
        cuts.sort_by(f64::total_cmp);
        for t in cuts {
            out.push(Segment {
                t_to: t - period,
                ..current
            });
            current.t_from = t;
        }
        out.push(current);
    }
    out
}

/// Recomputes metrics from a trace CSV. Segments follow setpoint changes,
/// optionally split further at `splits` (seconds).
pub fn cmd_metrics(path: &Path, band_pct: f64, splits: &[f64]) -> Result<MetricsTable, CliError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut trace = trace_csv::read_trace(file).map_err(trace_err(path))?;
    trace.controller = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let period = trace.period().unwrap_or(1.0);
    let segments = split_segments(&trace.setpoint_segments(), splits, period);
    Ok(MetricsTable::for_trace(&trace, &segments, band_pct)?)
}
