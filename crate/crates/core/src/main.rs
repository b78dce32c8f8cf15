use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use servo_pidnn::cli::commands::{cmd_compare, cmd_metrics, cmd_run, CliError, OutputOptions};
use servo_pidnn::cli::config::{load_config, RunConfig};
use servo_pidnn::metrics::DEFAULT_BAND_PCT;

#[derive(Parser)]
#[command(
    name = "servo-pidnn",
    version,
    about = "DC servo speed-loop simulator: PIDNN vs. classic PID"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one controller and write its trace CSV and plot.
    Run(SimArgs),
    /// Simulate every configured controller on the same scenario and
    /// tabulate their step-response metrics.
    Compare(SimArgs),
    /// Recompute metrics from an existing trace CSV.
    Metrics(MetricsArgs),
}

#[derive(Args)]
struct SimArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Settling band in percent; overrides `band_pct` from the config.
    #[arg(long)]
    band: Option<f64>,
    /// Also write per-sample PIDNN weights to a `.weights.csv` sidecar.
    #[arg(long)]
    dump_weights: bool,
    /// Skip SVG output.
    #[arg(long)]
    no_plot: bool,
}

#[derive(Args)]
struct MetricsArgs {
    /// Trace CSV produced by `run` or `compare`.
    trace: PathBuf,
    /// Settling band in percent.
    #[arg(long, default_value_t = DEFAULT_BAND_PCT)]
    band: f64,
    /// Extra segment boundary in seconds (repeatable), e.g. a load step.
    #[arg(long = "split")]
    splits: Vec<f64>,
    /// Write the table as CSV into this directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(args: &SimArgs) -> Result<(RunConfig, OutputOptions), CliError> {
    let mut cfg = load_config(&args.config)?;
    if let Some(band) = args.band {
        if !(band.is_finite() && band > 0.0) {
            return Err(servo_pidnn::cli::config::ConfigError::Invalid(
                "band_pct must be > 0".into(),
            )
            .into());
        }
        cfg.band_pct = band;
    }
    let out_dir = args.out.clone().unwrap_or_else(|| cfg.out_dir.clone());
    let opts = OutputOptions {
        out_dir,
        dump_weights: args.dump_weights,
        plot: !args.no_plot,
    };
    Ok((cfg, opts))
}

fn print_files(files: &[PathBuf]) {
    for f in files {
        eprintln!("wrote {}", f.display());
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => {
            let (cfg, opts) = load(&args)?;
            let report = cmd_run(&cfg, &opts)?;
            print_files(&report.files);
            print!("{}", report.table.to_text());
        }
        Command::Compare(args) => {
            let (cfg, opts) = load(&args)?;
            let report = cmd_compare(&cfg, &opts)?;
            print_files(&report.files);
            print!("{}", report.table.to_text());
        }
        Command::Metrics(args) => {
            let table = cmd_metrics(&args.trace, args.band, &args.splits)?;
            if let Some(dir) = &args.out {
                std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
                    path: dir.clone(),
                    source,
                })?;
                let stem = args
                    .trace
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "trace".into());
                let path = Path::new(dir).join(format!("{stem}_metrics.csv"));
                std::fs::write(&path, table.to_csv()).map_err(|source| CliError::Io {
                    path: path.clone(),
                    source,
                })?;
                print_files(&[path]);
            }
            print!("{}", table.to_text());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
