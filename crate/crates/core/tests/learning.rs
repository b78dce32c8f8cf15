use servo_pidnn::simloop::run_loop;
use servo_pidnn::{
    BuiltinParams, FopdtPlant, LearnConfig, Normalization, OutputLimits, Pidnn, PidnnWeights,
    Scenario, SimSettings,
};

fn weak_network(learn: LearnConfig) -> Pidnn {
    Pidnn::new(
        PidnnWeights::error_rows([0.5, 0.02, 0.0]),
        Normalization::new(50.0, 20.0).unwrap(),
        OutputLimits::default(),
        learn,
    )
}

/// Integrated absolute error in RPM·s, and the final weights.
fn run(mut net: Pidnn) -> (f64, PidnnWeights) {
    let settings = SimSettings::default();
    let scenario = Scenario::builtin("staircase", &BuiltinParams::default()).unwrap();
    let mut plant = FopdtPlant::new(settings.model, settings.sub_step).unwrap();
    let (rows, _) = run_loop(&scenario, &mut net, &mut plant, &settings).unwrap();
    let iae = rows.iter().map(|r| r.error.abs()).sum::<f64>() * settings.period;
    (iae, net.weights)
}

#[test]
fn learning_reduces_tracking_error_from_a_weak_start() {
    let (fixed, w_fixed) = run(weak_network(LearnConfig::disabled()));
    let (learned, w_learned) = run(weak_network(LearnConfig::default()));
    assert_eq!(w_fixed, PidnnWeights::error_rows([0.5, 0.02, 0.0]));
    assert!(
        learned < fixed,
        "IAE with learning {learned} vs fixed {fixed}"
    );
    assert!(w_learned.output[0] > 0.5 && w_learned.output[1] > 0.02);
    assert!(w_learned
        .iter()
        .all(|w| w.abs() <= LearnConfig::DEFAULT_WEIGHT_LIMIT));
}

#[test]
fn zero_rate_matches_disabled_learning() {
    let off = run(weak_network(LearnConfig::disabled()));
    let zero = run(weak_network(LearnConfig {
        rate: 0.0,
        ..LearnConfig::default()
    }));
    assert_eq!(off, zero);
}

#[test]
fn wrong_plant_sign_degrades_tracking() {
    let (right, _) = run(weak_network(LearnConfig::default()));
    let (wrong, _) = run(weak_network(LearnConfig {
        plant_sign: servo_pidnn::PlantSign::Negative,
        ..LearnConfig::default()
    }));
    assert!(wrong > right, "wrong sign {wrong} vs right {right}");
}

fn mean_abs_error(rows: &[servo_pidnn::TraceRow]) -> f64 {
    rows.iter().map(|r| r.error.abs()).sum::<f64>() / rows.len() as f64
}

#[test]
fn default_preset_error_shrinks_over_a_step_run() {
    let settings = SimSettings::default();
    let scenario = Scenario::builtin("step200", &BuiltinParams::default()).unwrap();
    for rate in [0.0, 0.005, 0.02, 0.05, 0.1] {
        let learn = LearnConfig {
            rate,
            ..LearnConfig::default()
        };
        let mut net = Pidnn::preset("default", OutputLimits::default(), learn).unwrap();
        let mut plant = FopdtPlant::new(settings.model, settings.sub_step).unwrap();
        let (rows, _) = run_loop(&scenario, &mut net, &mut plant, &settings).unwrap();
        assert_eq!(rows.len(), 2001);
        let first = mean_abs_error(&rows[..100]);
        let last = mean_abs_error(&rows[rows.len() - 100..]);
        assert!(
            last <= first,
            "eta {rate}: last second {last} vs first {first}"
        );
        assert!(last < 0.5, "eta {rate}: residual {last} RPM");
    }
}
