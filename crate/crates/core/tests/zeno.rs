use std::f64::consts::PI;

use proptest::prelude::*;

use wgqed::statespace::{EnsembleParams, ProtocolStep};
use wgqed::zeno::{
    adiabatic_goal_population, analytic_operating_point, analytics_protocol1, analytics_protocol2, analytics_protocol3,
    analytics_zeno_errors, exact_optimum, goal_population, protocol3_params, step_hamiltonian, suppression_factor,
    ZenoStepParams,
};

#[test]
fn protocol1_reference_values() {
    let e = EnsembleParams::new(100, 100, 0, 100.0).unwrap();
    let r = analytics_protocol1(&e).unwrap();
    assert!((r.value("optimal_omega_c") - 100.0).abs() < 1e-9);
    assert!((r.value("optimal_time_c") - PI / 10.0).abs() < 1e-12);
    assert!((r.value("p_c") - 100.0 / 101.0 * (-PI / 10.0).exp()).abs() < 1e-12);
    assert!((r.value("p_c_star") - PI / 2000.0).abs() < 1e-12);
    let csv = r.to_csv();
    assert!(csv.starts_with("quantity,value,formula,convention,valid\n"));
}

#[test]
fn protocol3_scaling_with_n() {
    let e = protocol3_params(&EnsembleParams::new(100, 100, 0, 100.0).unwrap()).unwrap();
    let r = analytics_protocol3(&e).unwrap();
    assert!((r.value("optimal_time") - PI * 3f64.sqrt() / 10.0).abs() < 1e-12);
    assert!((r.value("p_star") - PI * 3f64.sqrt() / 2000.0).abs() < 1e-12);
    assert!((r.value("p_pump_star") - 1.0 / 10000.0).abs() < 1e-15);
}

#[test]
fn protocol2_report_is_complete() {
    let e = EnsembleParams::new(100, 100, 2, 1000.0).unwrap();
    let r = analytics_protocol2(&e).unwrap();
    for key in ["exchange_time", "q_step", "p_e_star", "epsilon_star", "infidelity_step"] {
        assert!(r.get(key).is_some(), "{key}");
    }
}

#[test]
fn adiabatic_model_tracks_full_protocol3() {
    let e = protocol3_params(&EnsembleParams::new(100, 100, 0, 100.0).unwrap()).unwrap();
    let (omega, t) = analytic_operating_point(ProtocolStep::P3StepB, &e).unwrap();
    let full = goal_population(&step_hamiltonian(ProtocolStep::P3StepB, &e, omega).unwrap(), t).unwrap();
    let reduced = adiabatic_goal_population(&e, omega, t).unwrap();
    assert!(((full - reduced) / full).abs() < 0.03, "{full} vs {reduced}");
}

#[test]
fn far_detuned_suppression_is_small() {
    let s = suppression_factor(1.0, 100.0, None).unwrap();
    assert!(s.far_detuned && s.alpha < 1e-3);
}

#[test]
fn general_zeno_step_success_is_a_probability() {
    let z = ZenoStepParams::at_optimum(100, 100, 2, 300.0).unwrap();
    assert!(z.in_zeno_regime());
    let r = analytics_zeno_errors(&z).unwrap();
    assert!(r.value("success_probability") > 0.0 && r.value("success_probability") < 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn exact_step_c_approaches_closed_form(nm in 50u32..400, log_p in 2.0f64..4.0) {
        let p = 10f64.powf(log_p);
        let e = EnsembleParams::new(nm, nm, 0, p).unwrap();
        let exact = exact_optimum(ProtocolStep::P1StepC, &e).unwrap();
        let closed = analytics_protocol1(&e).unwrap().value("p_c");
        prop_assert!(((exact.at_analytic_time - closed) / closed).abs() < 0.02);
        prop_assert!(exact.refined >= exact.at_analytic_time - 1e-12);
    }

    #[test]
    fn probabilities_stay_in_unit_interval(n in 2u32..1000, m in 0u32..10, log_p in 0.0f64..5.0) {
        prop_assume!(m < n);
        let e = EnsembleParams::new(n, n, m, 10f64.powf(log_p)).unwrap();
        for r in [analytics_protocol1(&e).unwrap(), analytics_protocol2(&e).unwrap()] {
            for entry in &r.entries {
                if matches!(entry.kind, wgqed::zeno::Quantity::Probability) {
                    prop_assert!((0.0..=1.0).contains(&entry.value), "{} = {}", entry.name, entry.value);
                }
            }
        }
    }
}
