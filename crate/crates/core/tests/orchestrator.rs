use num_complex::Complex64 as C64;
use proptest::prelude::*;

use wgqed::merging::{repetition_recursion, MergePolicy, TwoModeState};
use wgqed::metrology::{make_state, noon_phases, StateKind};
use wgqed::orchestrator::{
    expected_cost, iterate_two_mode_add, repump, restart_expectation, run_campaign, run_protocol, step_models,
    two_mode_add, Protocol, ProtocolSpec, Register,
};
use wgqed::statespace::EnsembleParams;

fn params(n: u32, p: f64) -> EnsembleParams {
    EnsembleParams::new(n, n, 0, p).unwrap()
}

/// Expected attempts of the restart chain from the absorbing Markov chain:
/// `E_i = 1 + p_i E_{i+1} + (1 - p_i) E_0`, solved by back-substitution
/// `E_i = a_i + b_i E_0`.
fn markov_chain_oracle(ps: &[f64]) -> f64 {
    let (mut a, mut b) = (0.0, 0.0);
    for &p in ps.iter().rev() {
        a = 1.0 + p * a;
        b = p * b + (1.0 - p);
    }
    a / (1.0 - b)
}

#[test]
fn restart_expectation_matches_markov_chain() {
    for ps in [vec![0.5], vec![0.3, 0.9, 0.6], vec![0.15; 5]] {
        let got = restart_expectation(&ps);
        assert!((got - markov_chain_oracle(&ps)).abs() < 1e-9 * got, "{ps:?}");
    }
}

#[test]
fn forced_success_gives_m_attempts_and_m_errors() {
    let mut spec = ProtocolSpec::new(Protocol::P1, params(100, 100.0), 4);
    spec.forced_success = Some(1.0);
    let r = run_protocol(&spec, 3).unwrap();
    assert_eq!((r.attempts, r.heralds, r.restarts), (4, 4, 0));
    let per_step = step_models(&spec).unwrap()[0].error_on_success;
    assert!((r.accumulated_infidelity - 4.0 * per_step).abs() < 1e-15);
}

#[test]
fn zero_herald_tree_cost_is_the_recursion() {
    let mut spec = ProtocolSpec::new(Protocol::P2, params(100, 1000.0), 8);
    spec.merge_policy = Some(MergePolicy::ZeroHerald);
    let q = step_models(&spec).unwrap()[0].success;
    let expected = expected_cost(&spec).unwrap().repetitions;
    assert!((expected - repetition_recursion(8, 1.0 / q).unwrap().expected_repetitions).abs() < 1e-9);
    let seeds: Vec<u64> = (0..20_000).collect();
    let (_, s) = run_campaign(&spec, &seeds).unwrap();
    assert!(s.attempts_z() < 3.5, "z = {}", s.attempts_z());
}

#[test]
fn campaigns_are_seed_deterministic() {
    let spec = ProtocolSpec::new(Protocol::P3, params(60, 200.0), 5);
    let seeds: Vec<u64> = (100..400).collect();
    let (a, _) = run_campaign(&spec, &seeds).unwrap();
    let (b, _) = run_campaign(&spec, &seeds).unwrap();
    assert_eq!(a, b);
    assert!(a.iter().zip(&seeds).all(|(r, &s)| r.seed == s));
}

#[test]
fn invalid_specs_are_rejected() {
    let mut spec = ProtocolSpec::new(Protocol::P1, params(10, 10.0), 3);
    spec.merge_policy = Some(MergePolicy::ZeroHerald);
    assert!(spec.validate().is_err());
    let mut spec = ProtocolSpec::new(Protocol::P2, params(10, 10.0), 3);
    spec.merge_policy = Some(MergePolicy::ZeroHerald);
    assert!(spec.validate().is_err());
    assert!(ProtocolSpec::new(Protocol::P2, params(10, 10.0), 10).validate().is_err());
}

#[test]
fn repump_errors_scale_with_the_stored_fraction() {
    let e = params(100, 100.0);
    let p2 = repump(&e, 10, Protocol::P2).unwrap();
    assert_eq!(p2.sequence.len(), 3);
    assert!((p2.p_pump - 1.0 / (90.0 * 100.0)).abs() < 1e-15);
    let p3 = repump(&e, 10, Protocol::P3).unwrap();
    assert!((p3.p_pump - 1.0 / (100.0 * 100.0)).abs() < 1e-15);
    assert!((p3.error - p3.p_pump * 0.1).abs() < 1e-18);
    assert!(repump(&e, 1, Protocol::P1).is_err());
}

#[test]
fn staged_register_reaches_the_same_outcomes() {
    let s = 0.5f64.sqrt();
    let (a, b) = (C64::new(s, 0.0), C64::new(0.0, s));
    let state = TwoModeState::fock(1, 0, 1).unwrap();
    let staged = Register::new(a, b, &state).unwrap().c_up().o1().c_down().o2().measure().unwrap();
    let direct = two_mode_add(a, b, &state).unwrap();
    assert_eq!(staged, direct);
}

#[test]
fn noon_states_from_repeated_addition() {
    for n in 1..=6 {
        let built = iterate_two_mode_add(&noon_phases(n)).unwrap();
        assert!(built.phase_distance(&make_state(&StateKind::Noon(n)).unwrap()) < 1e-10, "n={n}");
    }
}

proptest! {
    #[test]
    fn addition_branch_probabilities_sum_to_one(theta in 0.0f64..1.57, phi in -3.1f64..3.1) {
        let a = C64::from_polar(theta.cos(), 0.0);
        let b = C64::from_polar(theta.sin(), phi);
        let out = two_mode_add(a, b, &TwoModeState::vacuum(0)).unwrap();
        prop_assert!((out.total_probability() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn balanced_addition_branches_are_equal_and_orthogonal(phi in -3.1f64..3.1) {
        let s = 0.5f64.sqrt();
        let out = two_mode_add(C64::new(s, 0.0), C64::from_polar(s, phi), &TwoModeState::vacuum(0)).unwrap();
        prop_assert!((out.up.probability - out.down.probability).abs() < 1e-12);
        prop_assert!(out.up.state.inner(&out.down.state).norm() < 1e-12);
    }

    #[test]
    fn restart_expectation_dominates_sequential(ps in proptest::collection::vec(0.05f64..1.0, 1..8)) {
        let sequential: f64 = ps.iter().map(|p| 1.0 / p).sum();
        prop_assert!(restart_expectation(&ps) >= sequential - 1e-9);
    }
}
