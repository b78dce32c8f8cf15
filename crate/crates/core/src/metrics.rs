//! Step-response quality indices: overshoot, settling time and steady-state
//! error over one segment of a trace.

use crate::error::{Error, Result};
use crate::simloop::{Segment, Trace};

/// Default settling band in percent of the target.
pub const DEFAULT_BAND_PCT: f64 = 2.0;

const MIN_SEGMENT_SAMPLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMetrics {
    /// Peak excursion past the target, in the direction of the step, as a
    /// percentage of `|target|`. Never negative.
    pub overshoot_pct: f64,
    /// Seconds from segment start until the response stays in the band;
    /// `None` if it is still outside at the last sample.
    pub settling_time: Option<f64>,
    /// Mean of `target − speed` over the last 10% of the segment.
    pub steady_state_error: f64,
    pub band_pct: f64,
}

/// Metrics over parallel `times`/`speed` slices covering one segment.
pub fn response_metrics(
    times: &[f64],
    speed: &[f64],
    target: f64,
    band_pct: f64,
) -> Result<StepMetrics> {
    assert_eq!(times.len(), speed.len(), "times and speed differ in length");
    if target == 0.0 || !target.is_finite() {
        return Err(Error::ZeroTarget);
    }
    if !(band_pct.is_finite() && band_pct > 0.0) {
        return Err(Error::invalid("band_pct", "must be > 0"));
    }
    let n = speed.len();
    if n < MIN_SEGMENT_SAMPLES {
        return Err(Error::SegmentTooShort {
            from: times.first().copied().unwrap_or(f64::NAN),
            to: times.last().copied().unwrap_or(f64::NAN),
            len: n,
        });
    }

    let band = band_pct / 100.0 * target.abs();

    // A segment that starts inside the band (e.g. a load step at constant
    // setpoint) moves back toward the target after its first excursion; that
    // recovery is the step direction.
    let reference = if (speed[0] - target).abs() > band {
        speed[0]
    } else {
        speed
            .iter()
            .copied()
            .find(|s| (s - target).abs() > band)
            .unwrap_or(speed[0])
    };
    let direction = if target >= reference { 1.0 } else { -1.0 };
    let peak_excess = speed
        .iter()
        .map(|&s| direction * (s - target))
        .fold(f64::NEG_INFINITY, f64::max);
    let overshoot_pct = (peak_excess / target.abs()).max(0.0) * 100.0;

    let settling_time = match speed.iter().rposition(|&s| (s - target).abs() > band) {
        None => Some(0.0),
        Some(last) if last + 1 == n => None,
        Some(last) => Some(times[last + 1] - times[0]),
    };

    let tail = (n / 10).max(1);
    let steady_state_error =
        speed[n - tail..].iter().map(|&s| target - s).sum::<f64>() / tail as f64;

    Ok(StepMetrics {
        overshoot_pct,
        settling_time,
        steady_state_error,
        band_pct,
    })
}

/// Metrics over the trace rows with `t_from ≤ t ≤ t_to`.
pub fn segment_metrics(
    trace: &Trace,
    t_from: f64,
    t_to: f64,
    target: f64,
    band_pct: f64,
) -> Result<StepMetrics> {
    let eps = trace.period().unwrap_or(1.0) * 1e-6;
    let (Some(first), Some(last)) = (trace.rows.first(), trace.rows.last()) else {
        return Err(Error::SegmentOutOfRange {
            from: t_from,
            to: t_to,
        });
    };
    if t_from < first.t - eps || t_to > last.t + eps || t_to < t_from {
        return Err(Error::SegmentOutOfRange {
            from: t_from,
            to: t_to,
        });
    }
    let (times, speed): (Vec<f64>, Vec<f64>) = trace
        .rows
        .iter()
        .filter(|r| r.t >= t_from - eps && r.t <= t_to + eps)
        .map(|r| (r.t, r.speed))
        .unzip();
    if times.len() < MIN_SEGMENT_SAMPLES {
        return Err(Error::SegmentTooShort {
            from: t_from,
            to: t_to,
            len: times.len(),
        });
    }
    response_metrics(&times, &speed, target, band_pct)
}

pub fn metrics_for(trace: &Trace, segment: &Segment, band_pct: f64) -> Result<StepMetrics> {
    segment_metrics(
        trace,
        segment.t_from,
        segment.t_to,
        segment.target,
        band_pct,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simloop::TraceRow;
    use proptest::prelude::*;

    fn trace_of(speed: &[f64], target: f64, period: f64) -> Trace {
        Trace {
            scenario: "synthetic".into(),
            controller: "none".into(),
            rows: speed
                .iter()
                .enumerate()
                .map(|(k, &s)| TraceRow {
                    t: k as f64 * period,
                    setpoint: target,
                    speed: s,
                    control: 0.0,
                    error: target - s,
                })
                .collect(),
            weights: Vec::new(),
        }
    }

    #[test]
    fn peak_214_3_is_7_15_percent() {
        let mut speed: Vec<f64> = (0..50).map(|k| 214.3 * k as f64 / 49.0).collect();
        speed.extend(std::iter::repeat_n(200.0, 200));
        let m = response_metrics(
            &(0..speed.len())
                .map(|k| k as f64 * 0.01)
                .collect::<Vec<_>>(),
            &speed,
            200.0,
            2.0,
        )
        .unwrap();
        assert!((m.overshoot_pct - 7.15).abs() < 1e-9);
        assert_eq!(m.steady_state_error, 0.0);
    }

    #[test]
    fn constant_on_target() {
        let trace = trace_of(&[200.0; 100], 200.0, 0.01);
        let m = segment_metrics(&trace, 0.0, 0.99, 200.0, 2.0).unwrap();
        assert_eq!(m.overshoot_pct, 0.0);
        assert_eq!(m.settling_time, Some(0.0));
        assert_eq!(m.steady_state_error, 0.0);
    }

    #[test]
    fn downward_step_overshoot_is_measured_below_target() {
        let mut speed = vec![300.0, 250.0, 190.0, 141.0, 147.0];
        speed.extend(std::iter::repeat_n(150.0, 20));
        let times: Vec<f64> = (0..speed.len()).map(|k| k as f64 * 0.01).collect();
        let m = response_metrics(&times, &speed, 150.0, 2.0).unwrap();
        assert!((m.overshoot_pct - 6.0).abs() < 1e-12);
        // last sample outside ±3 RPM is 141 at index 3
        assert!((m.settling_time.unwrap() - 0.04).abs() < 1e-12);
    }

    #[test]
    fn disturbance_dip_measures_overshoot_on_recovery_side() {
        // starts on target, dips to 170, recovers past to 203, settles
        let mut speed = vec![200.1, 200.0, 185.0, 170.0, 190.0, 203.0, 201.0];
        speed.extend(std::iter::repeat_n(200.0, 20));
        let times: Vec<f64> = (0..speed.len()).map(|k| k as f64 * 0.01).collect();
        let m = response_metrics(&times, &speed, 200.0, 2.0).unwrap();
        assert!((m.overshoot_pct - 1.5).abs() < 1e-12);
        assert!((m.settling_time.unwrap() - 0.05).abs() < 1e-12);
    }

    #[test]
    fn never_settling_is_flagged() {
        let speed: Vec<f64> = (0..100)
            .map(|k| if k % 2 == 0 { 150.0 } else { 250.0 })
            .collect();
        let trace = trace_of(&speed, 200.0, 0.01);
        let m = segment_metrics(&trace, 0.0, 0.99, 200.0, 2.0).unwrap();
        assert_eq!(m.settling_time, None);

        let rising: Vec<f64> = (0..100).map(|k| k as f64).collect();
        let m = segment_metrics(&trace_of(&rising, 200.0, 0.01), 0.0, 0.99, 200.0, 5.0).unwrap();
        assert_eq!(m.settling_time, None);
    }

    #[test]
    fn error_paths() {
        let trace = trace_of(&[1.0; 50], 1.0, 0.01);
        assert!(matches!(
            segment_metrics(&trace, 0.0, 0.05, 1.0, 2.0),
            Err(Error::SegmentTooShort { len: 6, .. })
        ));
        assert!(matches!(
            segment_metrics(&trace, 0.0, 0.49, 0.0, 2.0),
            Err(Error::ZeroTarget)
        ));
        assert!(matches!(
            segment_metrics(&trace, 0.0, 3.0, 1.0, 2.0),
            Err(Error::SegmentOutOfRange { .. })
        ));
    }

    #[test]
    fn sse_uses_final_tenth() {
        let mut speed = vec![0.0; 90];
        speed.extend(std::iter::repeat_n(198.0, 10));
        let times: Vec<f64> = (0..100).map(|k| k as f64).collect();
        let m = response_metrics(&times, &speed, 200.0, 2.0).unwrap();
        assert!((m.steady_state_error - 2.0).abs() < 1e-12);
    }

    fn response() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0..2.0f64, 20..200)
    }

    proptest! {
        #[test]
        fn scale_invariance(speed in response(), alpha in 0.01..100.0f64) {
            let times: Vec<f64> = (0..speed.len()).map(|k| k as f64 * 0.01).collect();
            let scaled: Vec<f64> = speed.iter().map(|s| s * alpha).collect();
            let a = response_metrics(&times, &speed, 1.0, 2.0).unwrap();
            let b = response_metrics(&times, &scaled, alpha, 2.0).unwrap();
            prop_assert!((a.overshoot_pct - b.overshoot_pct).abs() <= 1e-9 * (1.0 + a.overshoot_pct));
            prop_assert!((a.steady_state_error * alpha - b.steady_state_error).abs() <= 1e-9 * alpha);
            // band edges may flip by one rounding step; compare away from them
            let near_edge = speed.iter().any(|s| ((s - 1.0).abs() - 0.02).abs() < 1e-9);
            if !near_edge {
                prop_assert_eq!(a.settling_time, b.settling_time);
            }
        }

        #[test]
        fn settling_non_increasing_in_band(speed in response(), b1 in 0.5..10.0f64, extra in 0.0..10.0f64) {
            let times: Vec<f64> = (0..speed.len()).map(|k| k as f64 * 0.01).collect();
            let narrow = response_metrics(&times, &speed, 1.0, b1).unwrap();
            let wide = response_metrics(&times, &speed, 1.0, b1 + extra).unwrap();
            match (narrow.settling_time, wide.settling_time) {
                (Some(n), Some(w)) => prop_assert!(w <= n),
                (None, _) => {}
                (Some(_), None) => prop_assert!(false, "wider band failed to settle"),
            }
        }

        #[test]
        fn overshoot_never_negative(speed in response(), target in 0.1..3.0f64) {
            let times: Vec<f64> = (0..speed.len()).map(|k| k as f64).collect();
            let m = response_metrics(&times, &speed, target, 2.0).unwrap();
            prop_assert!(m.overshoot_pct >= 0.0);
        }
    }
}
