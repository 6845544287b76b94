use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

use wgqed::dynamics::oracle::lindblad_oracle;
use wgqed::dynamics::{propagate, trajectory, unraveling_balance_infinite, uniform_grid, EffectiveHamiltonian};
use wgqed::statespace::{build_basis, EnsembleParams, LabeledBasis, ProtocolStep};
use wgqed::zeno::{protocol3_params, step_hamiltonian};

/// Driven two-level system with loss κ on the upper level, solved by hand.
/// With `τ = tr H / 2` and `(H - τI)² = ω² I`, `ω² = g² + τ²`:
/// `e^{-iHt} = e^{-iτt}(cos(ωt) I - i sin(ωt)/ω (H - τI))`.
fn two_level_closed_form(g: f64, kappa: f64, t: f64) -> (C64, C64) {
    let tau = C64::new(0.0, -kappa / 4.0);
    let omega = (C64::new(g * g, 0.0) + tau * tau).sqrt();
    let i = C64::i();
    let phase = (-i * tau * t).exp();
    let (c, s) = ((omega * t).cos(), (omega * t).sin() / omega);
    // H - τ I = [[-τ, g], [g, -iκ/2 - τ]]
    let a00 = c - i * s * (-tau);
    let a10 = -i * s * g;
    (phase * a00, phase * a10)
}

#[test]
fn propagation_matches_two_level_closed_form() {
    let basis = LabeledBasis::new(vec!["g".into(), "e".into()], 0, 1).unwrap();
    for &(g, kappa) in &[(1.0, 0.5), (0.3, 4.0), (2.0, 0.0)] {
        let h = DMatrix::from_row_slice(
            2,
            2,
            &[C64::new(0.0, 0.0), C64::new(g, 0.0), C64::new(g, 0.0), C64::new(0.0, -kappa / 2.0)],
        );
        let h = EffectiveHamiltonian::new(basis.clone(), h).unwrap();
        for &t in &[0.1, 1.0, 3.7] {
            let psi = propagate(&h, &h.initial_state(), t).unwrap();
            let (a, b) = two_level_closed_form(g, kappa, t);
            assert!((psi[0] - a).norm() < 1e-12 && (psi[1] - b).norm() < 1e-12, "g={g} κ={kappa} t={t}");
        }
    }
}

#[test]
fn no_jump_norm_never_grows() {
    let e = EnsembleParams::new(40, 30, 2, 50.0).unwrap();
    for step in [ProtocolStep::P1StepC, ProtocolStep::P1StepE, ProtocolStep::P2StepE, ProtocolStep::GeneralZeno(3)] {
        let h = step_hamiltonian(step, &e, 4.0).unwrap();
        let traj = trajectory(&h, &h.initial_state(), &uniform_grid(2.0, 41)).unwrap();
        let n = traj.norms();
        assert!(n.windows(2).all(|w| w[1] <= w[0] + 1e-14), "{step}");
    }
}

#[test]
fn oracle_rejects_large_ensembles() {
    let e = EnsembleParams::new(12, 12, 0, 5.0).unwrap();
    assert!(lindblad_oracle(&e, ProtocolStep::P1StepC, 1.0, &[0.0, 0.1]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn restricted_basis_agrees_with_product_space(
        n in 1u32..=4,
        nd in 1u32..=3,
        p in 0.5f64..50.0,
        omega in 0.1f64..4.0,
        step_idx in 0usize..4,
    ) {
        let m = (n - 1).min(1);
        let step = ProtocolStep::ALL_FIXED[step_idx];
        let base = EnsembleParams::new(n, nd, m, p).unwrap();
        let e = if step == ProtocolStep::P3StepB { protocol3_params(&base).unwrap() } else { base };
        let grid = uniform_grid(2.0 / p.sqrt(), 9);
        let h = step_hamiltonian(step, &e, omega).unwrap();
        let traj = trajectory(&h, &h.initial_state(), &grid).unwrap();
        let oracle = lindblad_oracle(&e, step, omega, &grid).unwrap();
        prop_assert_eq!(oracle.labels.len(), build_basis(step, &e).unwrap().dim());
        for i in 0..h.dim() {
            for (a, b) in traj.populations(i).iter().zip(oracle.population(i)) {
                prop_assert!((a - b).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn surviving_plus_jumps_is_one(
        n in 2u32..200,
        nd in 1u32..200,
        p in 1.0f64..1e3,
        omega in 0.1f64..10.0,
        alpha in 0.05f64..1.0,
    ) {
        let e = EnsembleParams::new(n, nd, 1, p).unwrap().with_alpha(alpha).unwrap();
        for step in [ProtocolStep::P1StepC, ProtocolStep::P1StepE, ProtocolStep::P2StepE] {
            let h = step_hamiltonian(step, &e, omega).unwrap();
            let (s, j) = unraveling_balance_infinite(&h, &h.initial_state()).unwrap();
            prop_assert!((s + j - 1.0).abs() < 1e-6);
        }
    }
}
