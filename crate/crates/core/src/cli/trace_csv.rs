//! Trace CSV format.
//!
//! Header is exactly `t_s,setpoint_rpm,speed_rpm,control_v,error_rpm`; one
//! row per control instant. Numbers carry 9 significant digits. The optional
//! weight sidecar has `t_s` followed by `w_h_{j}{i}` and `w_o_{j}` columns.

use std::io::{Read, Write};

use thiserror::Error;

use crate::pidnn::PidnnWeights;
use crate::simloop::{Trace, TraceRow};

pub const TRACE_HEADER: [&str; 5] = ["t_s", "setpoint_rpm", "speed_rpm", "control_v", "error_rpm"];

pub const WEIGHT_HEADER: [&str; 10] = [
    "t_s", "w_h_11", "w_h_12", "w_h_21", "w_h_22", "w_h_31", "w_h_32", "w_o_1", "w_o_2", "w_o_3",
];

#[derive(Debug, Error)]
pub enum TraceCsvError {
    #[error("expected {expected} columns, found {found}")]
    ColumnCount { expected: usize, found: usize },

    #[error("column {position}: expected '{expected}', found '{found}'")]
    ColumnMismatch {
        position: usize,
        expected: &'static str,
        found: String,
    },

    #[error("row {row}, column '{column}': cannot parse '{value}' as a number")]
    BadValue {
        row: usize,
        column: &'static str,
        value: String,
    },

    #[error("trace has no rows")]
    Empty,

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Rounds to 9 significant digits and prints the shortest decimal that
/// reads back to the rounded value.
pub fn format_number(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    format!("{}", round_sig9(v))
}

/// The value a number takes after a write/read cycle.
pub fn round_sig9(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{v:.8e}").parse().expect("formatted float parses")
}

/// Rounds every stored value to what the CSV will hold, so metrics computed
/// in memory match metrics recomputed from the file.
pub fn quantize(trace: &Trace) -> Trace {
    let rows = trace
        .rows
        .iter()
        .map(|r| TraceRow {
            t: round_sig9(r.t),
            setpoint: round_sig9(r.setpoint),
            speed: round_sig9(r.speed),
            control: round_sig9(r.control),
            error: round_sig9(r.error),
        })
        .collect();
    Trace {
        rows,
        ..trace.clone()
    }
}

pub fn write_trace<W: Write>(out: W, trace: &Trace) -> Result<(), TraceCsvError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in &trace.rows {
        w.write_record([r.t, r.setpoint, r.speed, r.control, r.error].map(format_number))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_weights<W: Write>(out: W, trace: &Trace) -> Result<(), TraceCsvError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(WEIGHT_HEADER)?;
    for (row, weights) in trace.rows.iter().zip(&trace.weights) {
        let mut record = vec![format_number(row.t)];
        record.extend(weights.iter().map(format_number));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trace. `scenario` and `controller` are left for the caller to set.
pub fn read_trace<R: Read>(input: R) -> Result<Trace, TraceCsvError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader.headers()?.clone();
    if headers.len() != TRACE_HEADER.len() {
        // report the first expected column that is absent, if any
        if let Some((position, expected)) = TRACE_HEADER
            .iter()
            .enumerate()
            .find(|(_, name)| !headers.iter().any(|h| h == **name))
        {
            return Err(TraceCsvError::ColumnMismatch {
                position: position + 1,
                expected,
                found: headers.get(position).unwrap_or("<none>").to_string(),
            });
        }
        return Err(TraceCsvError::ColumnCount {
            expected: TRACE_HEADER.len(),
            found: headers.len(),
        });
    }
    for (position, (found, expected)) in headers.iter().zip(TRACE_HEADER).enumerate() {
        if found != expected {
            return Err(TraceCsvError::ColumnMismatch {
                position: position + 1,
                expected,
                found: found.to_string(),
            });
        }
    }

    let mut rows = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let row = idx + 1;
        if record.len() != TRACE_HEADER.len() {
            return Err(TraceCsvError::ColumnCount {
                expected: TRACE_HEADER.len(),
                found: record.len(),
            });
        }
        let mut values = [0.0; 5];
        for (slot, (field, column)) in values.iter_mut().zip(record.iter().zip(TRACE_HEADER)) {
            *slot = field.parse().map_err(|_| TraceCsvError::BadValue {
                row,
                column,
                value: field.to_string(),
            })?;
        }
        let [t, setpoint, speed, control, error] = values;
        rows.push(TraceRow {
            t,
            setpoint,
            speed,
            control,
            error,
        });
    }
    if rows.is_empty() {
        return Err(TraceCsvError::Empty);
    }
    Ok(Trace {
        scenario: String::new(),
        controller: String::new(),
        rows,
        weights: Vec::new(),
    })
}

/// Parses a weight sidecar back into snapshots.
pub fn read_weights<R: Read>(input: R) -> Result<Vec<(f64, PidnnWeights)>, TraceCsvError> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers()?.clone();
    for (position, (found, expected)) in headers.iter().zip(WEIGHT_HEADER).enumerate() {
        if found != expected {
            return Err(TraceCsvError::ColumnMismatch {
                position: position + 1,
                expected,
                found: found.to_string(),
            });
        }
    }
    if headers.len() != WEIGHT_HEADER.len() {
        return Err(TraceCsvError::ColumnCount {
            expected: WEIGHT_HEADER.len(),
            found: headers.len(),
        });
    }
    let mut out = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let mut v = [0.0; 10];
        for (slot, (field, column)) in v.iter_mut().zip(record.iter().zip(WEIGHT_HEADER)) {
            *slot = field.parse().map_err(|_| TraceCsvError::BadValue {
                row: idx + 1,
                column,
                value: field.to_string(),
            })?;
        }
        out.push((
            v[0],
            PidnnWeights {
                hidden: [[v[1], v[2]], [v[3], v[4]], [v[5], v[6]]],
                output: [v[7], v[8], v[9]],
            },
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_trace() -> Trace {
        Trace {
            scenario: "s".into(),
            controller: "c".into(),
            rows: (0..5)
                .map(|k| TraceRow {
                    t: k as f64 * 0.01,
                    setpoint: 200.0,
                    speed: 12.345678912345 * k as f64,
                    control: 1.0 / 3.0,
                    error: 200.0 - 12.345678912345 * k as f64,
                })
                .collect(),
            weights: Vec::new(),
        }
    }

    #[test]
    fn number_format() {
        assert_eq!(format_number(0.0), "0");
        assert_eq!(format_number(-0.0), "0");
        assert_eq!(format_number(200.0), "200");
        assert_eq!(format_number(0.01), "0.01");
        assert_eq!(format_number(0.07), "0.07");
        assert_eq!(format_number(1.0 / 3.0), "0.333333333");
        assert_eq!(format_number(-12.3456789012), "-12.3456789");
        assert_eq!(format_number(214.30000000001), "214.3");
    }

    #[test]
    fn header_is_exact() {
        let mut buf = Vec::new();
        write_trace(&mut buf, &sample_trace()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t_s,setpoint_rpm,speed_rpm,control_v,error_rpm\n"));
        assert_eq!(
            text.lines().nth(2).unwrap(),
            "0.01,200,12.3456789,0.333333333,187.654321"
        );
    }

    #[test]
    fn round_trip_equals_quantized_trace() {
        let trace = sample_trace();
        let mut buf = Vec::new();
        write_trace(&mut buf, &trace).unwrap();
        let back = read_trace(buf.as_slice()).unwrap();
        assert_eq!(back.rows, quantize(&trace).rows);
    }

    #[test]
    fn column_mismatch_names_the_column() {
        let csv = "t_s,setpoint_rpm,speed,control_v,error_rpm\n0,1,2,3,4\n";
        let err = read_trace(csv.as_bytes()).unwrap_err();
        assert_eq!(
            err.to_string(),
            "column 3: expected 'speed_rpm', found 'speed'"
        );

        let csv = "t_s,setpoint_rpm,control_v,error_rpm\n0,1,3,4\n";
        let err = read_trace(csv.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("'speed_rpm'"), "{err}");
    }

    #[test]
    fn bad_value_reports_row_and_column() {
        let csv = "t_s,setpoint_rpm,speed_rpm,control_v,error_rpm\n0,1,2,3,4\n0.01,1,x,3,4\n";
        let err = read_trace(csv.as_bytes()).unwrap_err();
        assert_eq!(
            err.to_string(),
            "row 2, column 'speed_rpm': cannot parse 'x' as a number"
        );
    }

    #[test]
    fn empty_trace_is_rejected() {
        let csv = "t_s,setpoint_rpm,speed_rpm,control_v,error_rpm\n";
        assert!(matches!(
            read_trace(csv.as_bytes()),
            Err(TraceCsvError::Empty)
        ));
    }

    #[test]
    fn weights_sidecar_round_trip() {
        let mut trace = sample_trace();
        let w = PidnnWeights {
            hidden: [[1.0, -1.0], [0.5, -0.25], [1.125, -0.875]],
            output: [7.5, 0.17, 5.0],
        };
        trace.weights = vec![w; trace.len()];
        let mut buf = Vec::new();
        write_weights(&mut buf, &trace).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(
            text.starts_with("t_s,w_h_11,w_h_12,w_h_21,w_h_22,w_h_31,w_h_32,w_o_1,w_o_2,w_o_3\n")
        );
        let back = read_weights(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 5);
        assert_eq!(back[3].1, w);
    }

    proptest! {
        #[test]
        fn write_read_write_is_stable(values in prop::collection::vec(-1e6..1e6f64, 5..50)) {
            let trace = Trace {
                scenario: String::new(),
                controller: String::new(),
                rows: values.iter().enumerate().map(|(k, &v)| TraceRow {
                    t: k as f64 * 0.01, setpoint: v, speed: v / 7.0, control: v * 1e-5, error: v - v / 7.0,
                }).collect(),
                weights: Vec::new(),
            };
            let mut first = Vec::new();
            write_trace(&mut first, &trace).unwrap();
            let back = read_trace(first.as_slice()).unwrap();
            let mut second = Vec::new();
            write_trace(&mut second, &back).unwrap();
            prop_assert_eq!(&first, &second);
            for (a, b) in trace.rows.iter().zip(&back.rows) {
                prop_assert!((a.speed - b.speed).abs() <= 5e-9 * a.speed.abs());
            }
        }
    }
}
