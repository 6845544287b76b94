//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so every line is printed. The process
//! exits zero so the rest of the workspace suite still runs; failures are
//! the FAIL lines and the closing summary.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wgqed::dynamics::oracle::lindblad_oracle;
use wgqed::dynamics::{trajectory, unraveling_balance_infinite, uniform_grid};
use wgqed::merging::{
    doubling_success, optimize_beta, repetition_recursion, threshold_exponent, threshold_success, ThresholdVariant,
};
use wgqed::metrology::{
    best_point, make_state, noon_phases, phase_grid, quantum_fisher_information, sensitivity_scan, Generator, Observable,
    PhaseProbe, StateKind,
};
use wgqed::optimize::polyfit;
use wgqed::orchestrator::{iterate_two_mode_add, run_campaign, two_mode_add, Protocol, ProtocolSpec};
use wgqed::statespace::{EnsembleParams, ProtocolStep};
use wgqed::zeno::{
    analytic_operating_point, analytics_protocol1, analytics_protocol3, exact_optimum, exact_p3_star, exact_p_c_star,
    protocol3_dark_state, protocol3_params, protocol3_populations_closed_form, step_hamiltonian,
};
use wgqed::merging::TwoModeState;

struct Outcome {
    pass: bool,
    detail: String,
}

fn criterion(id: u32, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let secs = start.elapsed().as_secs_f64();
    println!("{} [{id}] {name}: {} ({secs:.2} s)", if out.pass { "PASS" } else { "FAIL" }, out.detail);
    out.pass
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn with_budget(out: Outcome, start: Instant, budget: f64) -> Outcome {
    let secs = start.elapsed().as_secs_f64();
    if secs > budget {
        return Outcome { pass: false, detail: format!("{}; runtime {secs:.1} s exceeds {budget} s", out.detail) };
    }
    out
}

/// Exact step (c) success at the analytic optimum vs `N_m/(N_m+1) e^{-π/√P}`.
fn stepc_probability() -> Outcome {
    let start = Instant::now();
    let mut worst = Vec::new();
    let mut pass = true;
    for &p in &[10.0, 30.0, 100.0, 300.0, 1000.0, 1e4] {
        let e = EnsembleParams::new(100, 100, 0, p).unwrap();
        let exact = exact_optimum(ProtocolStep::P1StepC, &e).unwrap();
        let closed = analytics_protocol1(&e).unwrap().value("p_c");
        let d = rel(exact.at_analytic_time, closed);
        let tol = if p >= 50.0 { 0.02 } else { 0.08 };
        pass &= d <= tol;
        worst.push(format!("P={p}: {:.2}%", 100.0 * d));
    }
    with_budget(Outcome { pass, detail: worst.join(", ") }, start, 10.0)
}

/// Exact leaky emission vs `απ/(2N_m√P)` within 10%.
fn stepc_emission() -> Outcome {
    let start = Instant::now();
    let mut pass = true;
    let mut rows = Vec::new();
    for &nm in &[10u32, 100, 1000] {
        for &p in &[100.0, 300.0, 1000.0, 3000.0, 1e4] {
            let e = EnsembleParams::new(nm, nm, 0, p).unwrap();
            let exact = exact_p_c_star(&e).unwrap().total();
            let closed = analytics_protocol1(&e).unwrap().value("p_c_star");
            let ratio = exact / closed;
            pass &= (ratio - 1.0).abs() <= 0.10;
            rows.push(format!("N_m={nm},P={p}: {ratio:.3}"));
        }
    }
    with_budget(Outcome { pass, detail: format!("exact/closed {}", rows.join(" ")) }, start, 30.0)
}

/// Protocol 3: populations near T_opt, optimal probability and emission.
fn protocol3_figures() -> Outcome {
    let start = Instant::now();
    let mut notes = Vec::new();
    let mut pass = true;

    let e = protocol3_params(&EnsembleParams::new(100, 100, 0, 100.0).unwrap()).unwrap();
    let (omega, t_opt) = analytic_operating_point(ProtocolStep::P3StepB, &e).unwrap();
    let h = step_hamiltonian(ProtocolStep::P3StepB, &e, omega).unwrap();
    let grid: Vec<f64> = (0..=20).map(|i| t_opt * (0.8 + 0.02 * i as f64)).collect();
    let mut full = vec![0.0];
    full.extend(grid.iter().copied());
    let traj = trajectory(&h, &h.initial_state(), &full).unwrap();
    let dark = protocol3_dark_state(&e);
    let scale = 100.0 / 102.0;
    let (mut goal_dev, mut dark_dev) = (0.0f64, 0.0f64);
    for (i, &t) in grid.iter().enumerate() {
        let psi = traj.amplitudes(i + 1);
        let (cd, cg) = protocol3_populations_closed_form(&e, t);
        goal_dev = goal_dev.max(rel(psi[3].norm_sqr(), cg));
        dark_dev = dark_dev.max((dark.dotc(psi).norm_sqr() - cd).abs() / scale);
    }
    pass &= goal_dev <= 0.05 && dark_dev <= 0.05;
    notes.push(format!("goal pop {:.2}%, dark pop {:.2}% of prefactor", 100.0 * goal_dev, 100.0 * dark_dev));

    let mut prob = Vec::new();
    for &p in &[50.0, 100.0, 300.0, 1000.0, 1e4] {
        let e = EnsembleParams::new(100, 100, 0, p).unwrap();
        let exact = exact_optimum(ProtocolStep::P3StepB, &e).unwrap().at_analytic_time;
        let d = rel(exact, analytics_protocol3(&e).unwrap().value("p_step"));
        pass &= d <= 0.02;
        prob.push(format!("{:.2}%", 100.0 * d));
    }
    notes.push(format!("p_step dev {}", prob.join("/")));

    let mut emis = Vec::new();
    for &p in &[100.0, 1000.0, 1e4] {
        let e = EnsembleParams::new(100, 100, 0, p).unwrap();
        let ratio = exact_p3_star(&e).unwrap().total() / analytics_protocol3(&e).unwrap().value("p_star");
        pass &= (ratio - 1.0).abs() <= 0.10;
        emis.push(format!("{ratio:.3}"));
    }
    notes.push(format!("p_* exact/closed {}", emis.join("/")));
    with_budget(Outcome { pass, detail: notes.join("; ") }, start, 30.0)
}

/// Restricted propagation vs product-space oracle for N ≤ 5, m ≤ 2.
fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut cases = 0;
    let steps =
        [ProtocolStep::P1StepC, ProtocolStep::P1StepE, ProtocolStep::P2StepE, ProtocolStep::P3StepB, ProtocolStep::GeneralZeno(1)];
    for n in 1..=5u32 {
        for m in 0..=2u32.min(n - 1) {
            for step in steps {
                if let ProtocolStep::GeneralZeno(k) = step {
                    if k + 1 > n {
                        continue;
                    }
                }
                let base = EnsembleParams::new(n, n.min(4), m, 7.0).unwrap();
                let e = if step == ProtocolStep::P3StepB { protocol3_params(&base).unwrap() } else { base };
                let omega = 1.3;
                let h = step_hamiltonian(step, &e, omega).unwrap();
                let grid = uniform_grid(1.5, 16);
                let traj = trajectory(&h, &h.initial_state(), &grid).unwrap();
                let oracle = lindblad_oracle(&e, step, omega, &grid).unwrap();
                for i in 0..h.dim() {
                    for (a, b) in traj.populations(i).iter().zip(oracle.population(i)) {
                        worst = worst.max((a - b).abs());
                    }
                }
                for (a, b) in traj.norms().iter().zip(&oracle.norms) {
                    worst = worst.max((a - b).abs());
                }
                cases += 1;
            }
        }
    }
    with_budget(Outcome { pass: worst <= 1e-8, detail: format!("{cases} cases, max deviation {worst:.2e}") }, start, 60.0)
}

/// Surviving norm plus every channel's jump probability over [0, ∞).
fn unraveling_completeness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for _ in 0..5 {
        let n = rng.random_range(3..400u32);
        let nd = rng.random_range(1..400u32);
        let m = rng.random_range(0..n.min(4));
        let p = 10f64.powf(rng.random_range(0.5..3.5));
        let omega = rng.random_range(0.1..5.0);
        let k = rng.random_range(0..n - m);
        let base = EnsembleParams::new(n, nd, m, p).unwrap().with_alpha(rng.random_range(0.05..1.0)).unwrap();
        for step in [
            ProtocolStep::P1StepC,
            ProtocolStep::P1StepE,
            ProtocolStep::P2StepE,
            ProtocolStep::P3StepB,
            ProtocolStep::GeneralZeno(k.min(n - 1)),
        ] {
            let e = if step == ProtocolStep::P3StepB { base.with_mode_ratio(rng.random_range(0.2..100.0)).unwrap() } else { base };
            let h = step_hamiltonian(step, &e, omega).unwrap();
            let (surv, jumps) = unraveling_balance_infinite(&h, &h.initial_state()).unwrap();
            worst = worst.max((surv + jumps - 1.0).abs());
            cases += 1;
        }
    }
    Outcome { pass: worst <= 1e-6, detail: format!("{cases} Hamiltonians, max |balance - 1| = {worst:.2e}") }
}

fn combinatorics() -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();
    let exact = (1..=10).all(|k| doubling_success(k).unwrap().exact_agreement());
    pass &= exact;
    notes.push(format!("q_k rational match k<=10: {exact}"));
    let q1 = doubling_success(1).unwrap().projected;
    pass &= q1 == 0.5;
    let r2 = repetition_recursion(2, 1.0).unwrap().expected_repetitions;
    let r4 = repetition_recursion(4, 1.0).unwrap().expected_repetitions;
    pass &= (r2 - 6.0).abs() < 1e-12 && (r4 - 34.67).abs() < 5e-3;
    notes.push(format!("q_1={q1}, R_2={r2}, R_4={r4:.3}"));
    let plan = repetition_recursion(1024, 1.0).unwrap();
    let xs: Vec<f64> = plan.step_log.iter().map(|l| ((2 * l.excitations as u64) as f64).ln()).collect();
    let ys: Vec<f64> = plan.step_log.iter().map(|l| l.cumulative.ln()).collect();
    let fit = polyfit(&xs, &ys, 2).unwrap();
    pass &= fit[2] > 0.0;
    notes.push(format!("ln R vs (ln m)^2 curvature {:.4}", fit[2]));
    Outcome { pass, detail: notes.join(", ") }
}

fn two_mode_algebra() -> Outcome {
    let s = 0.5f64.sqrt();
    let out = two_mode_add(C64::new(s, 0.0), C64::new(s, 0.0), &TwoModeState::vacuum(0)).unwrap();
    let equal = (out.up.probability - out.down.probability).abs() < 1e-15;
    let orthogonal = out.up.state.inner(&out.down.state).norm() < 1e-15;
    let mut worst = 0.0f64;
    for n in 1..=6 {
        let built = iterate_two_mode_add(&noon_phases(n)).unwrap();
        let noon = make_state(&StateKind::Noon(n)).unwrap();
        worst = worst.max(built.phase_distance(&noon));
    }
    Outcome {
        pass: equal && orthogonal && worst <= 1e-10,
        detail: format!("equal norms {equal}, orthogonal {orthogonal}, NOON(n<=6) infidelity {worst:.1e}"),
    }
}

fn metrology() -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();
    let mut qfi_dev = 0.0f64;
    for n in 1..=16 {
        let f = quantum_fisher_information(&PhaseProbe::from_kind(&StateKind::Noon(n), Generator::HalfDifference).unwrap()).unwrap();
        qfi_dev = qfi_dev.max((f.f_q - (n * n) as f64).abs());
    }
    for m in 1..=8 {
        let probe = PhaseProbe::from_kind(&StateKind::HollandBurnett(m), Generator::HalfDifference).unwrap();
        let f = quantum_fisher_information(&probe).unwrap();
        let n = (2 * m) as f64;
        qfi_dev = qfi_dev.max((f.f_q - (2 * m * (m + 1)) as f64).abs());
        qfi_dev = qfi_dev.max((f.delta_phi_min - 1.0 / (n * (1.0 + n / 2.0)).sqrt()).abs());
    }
    pass &= qfi_dev <= 1e-9;
    notes.push(format!("QFI max deviation {qfi_dev:.1e}"));

    let phis = phase_grid(0.3, 61);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut cr_ok = true;
    for m in [8usize, 16, 32] {
        let probe = PhaseProbe::from_kind(&StateKind::Yurke(m), Generator::Interferometer).unwrap();
        let scan = sensitivity_scan(&probe, &Observable::ALL, &phis).unwrap();
        cr_ok &= scan.iter().all(|p| p.delta_phi >= p.qfi_bound - 1e-9);
        let best = best_point(&scan).unwrap();
        xs.push((probe.n_total as f64).ln());
        ys.push(best.delta_phi.ln());
    }
    let slope = polyfit(&xs, &ys, 1).unwrap()[1];
    pass &= (slope + 1.0).abs() <= 0.1;
    notes.push(format!("Yurke slope {slope:.3}"));
    for kind in [StateKind::Noon(4), StateKind::HollandBurnett(3), StateKind::SingleMode(8), StateKind::DualFock(3)] {
        for g in [Generator::HalfDifference, Generator::Interferometer] {
            let probe = PhaseProbe::from_kind(&kind, g).unwrap();
            let scan = sensitivity_scan(&probe, &Observable::ALL, &phis).unwrap();
            cr_ok &= scan.iter().all(|p| p.delta_phi >= p.qfi_bound - 1e-9);
        }
    }
    pass &= cr_ok;
    notes.push(format!("Cramér-Rao ordering {cr_ok}"));
    Outcome { pass, detail: notes.join(", ") }
}

fn monte_carlo() -> Outcome {
    let spec = ProtocolSpec::new(Protocol::P1, EnsembleParams::new(100, 100, 0, 100.0).unwrap(), 3);
    let seeds: Vec<u64> = (0..100_000).collect();
    let (_, s) = run_campaign(&spec, &seeds).unwrap();
    let z = s.attempts_z();
    Outcome {
        pass: z <= 3.0,
        detail: format!(
            "mean attempts {:.4} ± {:.4}, analytic {:.4}, z = {z:.2}; p_m closed form {:.4}",
            s.mean_attempts,
            s.sem_attempts,
            s.expected.repetitions,
            (-6.0 * PI / 10.0).exp()
        ),
    }
}

/// Not asserted: the threshold-policy reference triple under each reading.
fn threshold_log() {
    let half = threshold_success(64, 0.5).unwrap();
    println!(
        "INFO [10] s_1/2 at m=64: continuum {:.4}, per-mode continuum {:.4}, exact (m total) {:.4}, exact |m,m> {:.4}; quoted 1/3 gives exponent {:.3}",
        half.continuum,
        half.per_mode,
        half.exact,
        half.exact_per_mode,
        threshold_exponent(0.5, 1.0 / 3.0)
    );
    for v in [
        ThresholdVariant::Continuum,
        ThresholdVariant::PerMode,
        ThresholdVariant::ExactDiscrete { m: 64 },
        ThresholdVariant::ExactPerMode { m: 64 },
    ] {
        let o = optimize_beta(v).unwrap();
        println!("INFO [10] {v:?}: beta* = {:.4}, exponent {:.4} (quoted 0.238 / 3.86)", o.beta, o.exponent);
    }
}

fn main() {
    let results = [
        criterion(1, "step (c) optimal probability", stepc_probability),
        criterion(2, "step (c) leaky emission", stepc_emission),
        criterion(3, "protocol 3 populations, probability, emission", protocol3_figures),
        criterion(4, "oracle equivalence", oracle_equivalence),
        criterion(5, "unraveling completeness", unraveling_completeness),
        criterion(6, "merging combinatorics", combinatorics),
        criterion(7, "two-mode heralded addition", two_mode_algebra),
        criterion(8, "metrology", metrology),
        criterion(9, "Monte Carlo restart cost", monte_carlo),
    ];
    threshold_log();
    let failed = results.iter().filter(|&&ok| !ok).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
}
