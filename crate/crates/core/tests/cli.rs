use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use servo_pidnn::cli::commands::{cmd_compare, cmd_metrics, cmd_run, OutputOptions};
use servo_pidnn::cli::config::parse_config;
use servo_pidnn::cli::trace_csv::{read_weights, TRACE_HEADER, WEIGHT_HEADER};

fn bin(args: &[&str]) -> Output {
    bin_in(Path::new("."), args)
}

fn bin_in(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_servo-pidnn"))
        .current_dir(cwd)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Table rows without the controller column.
fn numeric_columns(table: &str) -> Vec<String> {
    table
        .lines()
        .skip(1)
        .map(|l| l.split_whitespace().skip(1).collect::<Vec<_>>().join(" "))
        .collect()
}

#[test]
fn run_then_metrics_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let config = write_config(
        dir.path(),
        "scenario = \"staircase\"\ncontroller = \"pidnn\"\n",
    );
    let run = bin(&[
        "run",
        "--config",
        &config,
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{}", stderr(&run));

    let csv = out_dir.join("staircase_pidnn.csv");
    assert!(csv.is_file());
    assert!(out_dir.join("staircase_pidnn.svg").is_file());
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some(TRACE_HEADER.join(",").as_str()));
    assert_eq!(text.lines().count(), 1 + 2001);

    let metrics = bin(&["metrics", csv.to_str().unwrap()]);
    assert!(metrics.status.success(), "{}", stderr(&metrics));
    assert_eq!(
        numeric_columns(&stdout(&run)),
        numeric_columns(&stdout(&metrics))
    );
    assert_eq!(numeric_columns(&stdout(&metrics)).len(), 3);
}

#[test]
fn library_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config("scenario = \"loadchange\"\ncontroller = \"pid-kuhn\"\n").unwrap();
    let report = cmd_run(&cfg, &OutputOptions::new(dir.path())).unwrap();
    let again = cmd_metrics(&dir.path().join("loadchange_pid-kuhn.csv"), 2.0, &[10.0]).unwrap();
    assert_eq!(report.table.rows.len(), 2);
    assert_eq!(again.rows.len(), 2);
    for (a, b) in report.table.rows.iter().zip(&again.rows) {
        assert_eq!(a.segment, b.segment);
        assert_eq!(a.metrics, b.metrics);
    }
}

#[test]
fn compare_writes_one_trace_per_controller() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("cmp");
    let config = write_config(
        dir.path(),
        "scenario = \"step200\"\ncontrollers = [\"pidnn\", \"pid-kuhn\", \"pid-unit\"]\n",
    );
    let out = bin(&[
        "compare",
        "--config",
        &config,
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));

    for name in ["pidnn", "pid-kuhn", "pid-unit"] {
        assert!(
            out_dir.join(format!("step200_{name}.csv")).is_file(),
            "{name}"
        );
    }
    assert!(out_dir.join("step200_compare.svg").is_file());
    let table = stdout(&out);
    assert_eq!(table.lines().count(), 1 + 3);
    let unit_row = table.lines().find(|l| l.starts_with("pid-unit")).unwrap();
    assert!(unit_row.contains("unsettled"));

    let csv = fs::read_to_string(out_dir.join("step200_metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    let unit_csv = csv.lines().find(|l| l.starts_with("pid-unit")).unwrap();
    assert_eq!(unit_csv.split(',').nth(5), Some(""));
}

#[test]
fn scenario_file_and_weight_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("ramp.toml"),
        "duration = 2.0\nsetpoint_rpm = [[0.0, 100.0], [1.0, 180.0]]\n",
    )
    .unwrap();
    let config = write_config(
        dir.path(),
        "scenario = \"ramp.toml\"\ncontroller = \"pidnn\"\nout_dir = \"res\"\n",
    );
    let out = bin_in(
        dir.path(),
        &["run", "--config", &config, "--dump-weights", "--no-plot"],
    );
    assert!(out.status.success(), "{}", stderr(&out));

    let res = dir.path().join("res");
    let weights = res.join("ramp_pidnn.weights.csv");
    let text = fs::read_to_string(&weights).unwrap();
    assert_eq!(text.lines().next(), Some(WEIGHT_HEADER.join(",").as_str()));
    let rows = read_weights(text.as_bytes()).unwrap();
    assert_eq!(rows.len(), 201);
    assert!(res.join("ramp_pidnn.csv").is_file());
    assert!(!res.join("ramp_pidnn.svg").exists());
    assert_ne!(rows[0].1, rows[200].1, "learning moved the weights");
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();

    let missing = dir.path().join("absent.toml");
    let out = bin(&["run", "--config", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).starts_with("error: "));

    let config = write_config(dir.path(), "scenario = \"step200\"\n");
    let out = bin(&["run", "--config", &config]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("missing required keys: controller"));

    let config = write_config(
        dir.path(),
        "scenario = \"step200\"\ncontroller = \"pidnn\"\n[sim]\nperiod_Ts = 0\n",
    );
    let out = bin(&["run", "--config", &config]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("period_Ts must be > 0"));

    let config = write_config(
        dir.path(),
        "scenario = \"step200\"\ncontrollers = [\"pidnn\", \"pid-kuhn\"]\n",
    );
    let out = bin(&["run", "--config", &config]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_trace_names_the_column() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(
        &path,
        "t_s,setpoint_rpm,speed,control_v,error_rpm\n0,200,0,1,200\n",
    )
    .unwrap();
    let out = bin(&["metrics", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(
        stderr(&out).contains("column 3: expected 'speed_rpm', found 'speed'"),
        "{}",
        stderr(&out)
    );

    fs::write(
        &path,
        format!("{}\n0,200,zero,1,200\n", TRACE_HEADER.join(",")),
    )
    .unwrap();
    let out = bin(&["metrics", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(
        stderr(&out).contains("column 'speed_rpm'"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn band_override_changes_reported_band() {
    let dir = tempfile::tempdir().unwrap();
    let cfg =
        parse_config("scenario = \"step200\"\ncontroller = \"pid-kuhn\"\nband_pct = 5\n").unwrap();
    let mut opts = OutputOptions::new(dir.path());
    opts.plot = false;
    let report = cmd_compare(&cfg, &opts).unwrap();
    let row = &report.table.rows[0];
    assert_eq!(row.metrics.band_pct, 5.0);
    let wide = row.metrics.settling_time.unwrap();

    let narrow = cmd_metrics(&dir.path().join("step200_pid-kuhn.csv"), 2.0, &[]).unwrap();
    assert!(narrow.rows[0].metrics.settling_time.unwrap() > wide);
}
