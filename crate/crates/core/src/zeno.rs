//! Step Hamiltonians and the closed-form figures of merit of the three
//! loading protocols.
//!
//! Each `analytics_*` function returns an [`AnalyticReport`], a flat list of
//! named quantities. Every entry carries a short formula label, whether its
//! value rests on a chosen proportionality constant (`convention`), and
//! whether the parameters sit inside the regime where the closed form is
//! expected to hold (`valid`).
//!
//! The `exact_*` helpers evaluate the same quantities from the restricted
//! no-jump dynamics so the two can be compared.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::dynamics::{self, fmt12, propagate, trajectory, EffectiveHamiltonian};
use crate::error::{invalid, Result};
use crate::optimize::{golden_max, Extremum};
use crate::statespace::{
    build_basis, dark_superradiant_decomposition, step_structure, EnsembleParams, LabeledBasis, ProtocolStep,
};

/// Drive-to-dissipation ratio above which the Zeno closed forms are not
/// trusted.
pub const ZENO_RATIO_LIMIT: f64 = 0.3;

/// Parameters of the generalized two-ensemble Zeno step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZenoStepParams {
    pub n_a: u32,
    pub n_b: u32,
    /// Excitations already in level 1 of ensemble a.
    pub k: u32,
    pub gamma_1d: f64,
    pub gamma_star: f64,
    pub omega: f64,
}

impl ZenoStepParams {
    /// Normalized parameters (Γ* = 1) driven at the balanced optimum
    /// `Ω = √((N_b + k + 1) Γ_1d Γ*)`.
    pub fn at_optimum(n_a: u32, n_b: u32, k: u32, purcell: f64) -> Result<Self> {
        let p = Self { n_a, n_b, k, gamma_1d: purcell, gamma_star: 1.0, omega: 0.0 };
        let p = Self { omega: p.optimal_omega(), ..p };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_a == 0 || self.n_b == 0 {
            return Err(invalid("n_a/n_b", "ensembles must be non-empty"));
        }
        if self.k + 1 > self.n_a {
            return Err(invalid("k", format!("k = {} needs k + 1 atoms in ensemble a", self.k)));
        }
        for (name, v) in [("gamma_1d", self.gamma_1d), ("gamma_star", self.gamma_star)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("{v} is not a positive rate")));
            }
        }
        if !(self.omega.is_finite() && self.omega >= 0.0) {
            return Err(invalid("omega", format!("{} is not a non-negative drive", self.omega)));
        }
        Ok(())
    }

    pub fn purcell(&self) -> f64 {
        self.gamma_1d / self.gamma_star
    }

    /// `N_b + k + 1`, the superradiant enhancement.
    pub fn collective_factor(&self) -> f64 {
        (self.n_b + self.k + 1) as f64
    }

    /// `Ω / (N_b Γ_1d)`.
    pub fn zeno_ratio(&self) -> f64 {
        self.omega / (self.n_b as f64 * self.gamma_1d)
    }

    pub fn in_zeno_regime(&self) -> bool {
        self.zeno_ratio() < ZENO_RATIO_LIMIT
    }

    pub fn optimal_omega(&self) -> f64 {
        (self.collective_factor() * self.gamma_1d * self.gamma_star).sqrt()
    }

    pub fn optimal_time(&self) -> f64 {
        PI / (((self.k + 1) as f64) * self.gamma_1d * self.gamma_star).sqrt()
    }

    fn ensemble(&self) -> EnsembleParams {
        EnsembleParams {
            n_target: self.n_a,
            n_detector: self.n_b,
            m: 0,
            gamma_1d: self.gamma_1d,
            gamma_star: self.gamma_star,
            alpha: 1.0,
            gamma_1d_s: None,
        }
    }
}

/// What kind of number a report entry holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Probability,
    Rate,
    Time,
    Scalar,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportEntry {
    pub name: String,
    pub value: f64,
    pub formula: &'static str,
    pub kind: Quantity,
    pub convention: bool,
    pub valid: bool,
}

/// Named closed-form quantities.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnalyticReport {
    pub entries: Vec<ReportEntry>,
}

impl AnalyticReport {
    fn push(&mut self, name: &str, value: f64, formula: &'static str, kind: Quantity, valid: bool) {
        self.push_full(name, value, formula, kind, false, valid);
    }

    fn push_full(&mut self, name: &str, value: f64, formula: &'static str, kind: Quantity, convention: bool, valid: bool) {
        let (value, valid) = match kind {
            Quantity::Probability if !(0.0..=1.0).contains(&value) => (value.clamp(0.0, 1.0), false),
            _ => (value, valid),
        };
        self.entries.push(ReportEntry { name: name.to_string(), value, formula, kind, convention, valid });
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entry(name).map(|e| e.value)
    }

    pub fn entry(&self, name: &str) -> Option<&ReportEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Like [`get`](Self::get) but panics on a missing name; for internal
    /// use where the name is a literal.
    pub fn value(&self, name: &str) -> f64 {
        self.get(name).unwrap_or_else(|| panic!("report has no entry {name}"))
    }

    /// CSV with header `quantity,value,formula,convention,valid`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("quantity,value,formula,convention,valid\n");
        for e in &self.entries {
            let _ = writeln!(out, "{},{},{},{},{}", e.name, fmt12(e.value), e.formula, e.convention, e.valid);
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Hamiltonians

pub fn hamiltonian_protocol1_step_c(params: &EnsembleParams, omega: f64) -> Result<EffectiveHamiltonian> {
    EffectiveHamiltonian::from_structure(&step_structure(ProtocolStep::P1StepC, params)?, omega)
}

pub fn hamiltonian_protocol1_step_e(params: &EnsembleParams, omega: f64) -> Result<EffectiveHamiltonian> {
    EffectiveHamiltonian::from_structure(&step_structure(ProtocolStep::P1StepE, params)?, omega)
}

pub fn hamiltonian_general_zeno(p: &ZenoStepParams) -> Result<EffectiveHamiltonian> {
    p.validate()?;
    let s = step_structure(ProtocolStep::GeneralZeno(p.k), &p.ensemble())?;
    EffectiveHamiltonian::from_structure(&s, p.omega)
}

pub fn hamiltonian_protocol2_step_e(params: &EnsembleParams) -> Result<EffectiveHamiltonian> {
    EffectiveHamiltonian::from_structure(&step_structure(ProtocolStep::P2StepE, params)?, 0.0)
}

pub fn hamiltonian_protocol3(params: &EnsembleParams, omega_d: f64) -> Result<EffectiveHamiltonian> {
    EffectiveHamiltonian::from_structure(&step_structure(ProtocolStep::P3StepB, params)?, omega_d)
}

/// Hamiltonian of any step at drive `omega` (ignored by protocol 2 step (e)).
pub fn step_hamiltonian(step: ProtocolStep, params: &EnsembleParams, omega: f64) -> Result<EffectiveHamiltonian> {
    match step {
        ProtocolStep::P2StepE => hamiltonian_protocol2_step_e(params),
        _ => EffectiveHamiltonian::from_structure(&step_structure(step, params)?, omega),
    }
}

/// Dark-state/goal two-level model of protocol 3 after eliminating the
/// superradiant states. Basis: (dark, goal).
pub fn adiabatic_reduction_protocol3(params: &EnsembleParams, omega_d: f64) -> Result<EffectiveHamiltonian> {
    params.validate()?;
    let full = step_structure(ProtocolStep::P3StepB, params)?;
    let nm = params.n_m() as f64;
    let balanced = params.balanced_mode_ratio() * params.gamma_1d;
    if let Some(gs) = params.gamma_1d_s {
        if ((gs - balanced) / balanced).abs() > 1e-9 {
            log::warn!("adiabatic reduction assumes Γ_s/Γ_g = (N_m+1)/2, got {}", gs / params.gamma_1d);
        }
    }
    let ratio = omega_d / (nm * params.gamma_1d);
    if ratio >= ZENO_RATIO_LIMIT {
        log::warn!("adiabatic reduction outside the Zeno regime (Ω_d/(N_m Γ_1d) = {ratio:.3})");
    }
    let labels = vec!["dark".to_string(), full.basis.label(full.basis.goal()).to_string()];
    let basis = LabeledBasis::new(labels, 0, 1)?;
    let g = C64::new(omega_d / (2.0 * nm.sqrt()), 0.0);
    let m = DMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(0.0, -params.gamma_star / 2.0),
            g,
            g,
            C64::new(0.0, -3.0 * omega_d * omega_d / (2.0 * nm * params.gamma_1d)),
        ],
    );
    EffectiveHamiltonian::new(basis, m)
}

/// Goal population predicted by the adiabatic model, including the
/// overlap `N_m/(N_m+2)` of the initial state with the dark state.
pub fn adiabatic_goal_population(params: &EnsembleParams, omega_d: f64, t: f64) -> Result<f64> {
    let h = adiabatic_reduction_protocol3(params, omega_d)?;
    let psi = propagate(&h, &h.initial_state(), t)?;
    let nm = params.n_m() as f64;
    Ok(nm / (nm + 2.0) * psi[1].norm_sqr())
}

/// Normalized protocol 3 dark state `(√N_m, -1, 1, 0)/√(N_m+2)` over
/// (source excited, target excited, detector excited, goal).
pub fn protocol3_dark_state(params: &EnsembleParams) -> nalgebra::DVector<C64> {
    let nm = params.n_m() as f64;
    let s = (nm + 2.0).sqrt();
    crate::linalg::real_vector(&[nm.sqrt() / s, -1.0 / s, 1.0 / s, 0.0])
}

/// Closed-form `(|c_d|², |c_goal|²)` of protocol 3 at the optimal drive.
pub fn protocol3_populations_closed_form(params: &EnsembleParams, t: f64) -> (f64, f64) {
    let p = params.normalized();
    let tau = t * params.gamma_star;
    let nm = p.n_m() as f64;
    let pre = nm / (nm + 2.0) * (-tau).exp();
    let phase = (p.gamma_1d * p.gamma_star).sqrt() * tau / (2.0 * 3f64.sqrt());
    (pre * phase.cos().powi(2), pre * phase.sin().powi(2))
}

/// Zeno-limit `(|c_d|², |c_goal|²)` at the analytic operating point of a
/// step: `w e^{-Γ* t} cos²(πt/2T)` and `w e^{-Γ* t} sin²(πt/2T)`, where `w`
/// is the initial state's weight on the driven dark state and `T` the
/// optimal time.
pub fn zeno_populations_closed_form(step: ProtocolStep, params: &EnsembleParams, t: f64) -> Result<(f64, f64)> {
    let params = if step == ProtocolStep::P3StepB { protocol3_params(params)? } else { *params };
    let (_, t_opt) = analytic_operating_point(step, &params)?;
    let d = dark_superradiant_decomposition(step, &params)?;
    let initial = build_basis(step, &params)?.initial();
    let w = d.dark_overlap(initial).powi(2) * (-params.gamma_star * t).exp();
    let phase = PI * t / (2.0 * t_opt);
    Ok((w * phase.cos().powi(2), w * phase.sin().powi(2)))
}

// ---------------------------------------------------------------------------
// Closed forms

fn exp(x: f64) -> f64 {
    x.exp()
}

pub fn analytics_protocol1(params: &EnsembleParams) -> Result<AnalyticReport> {
    params.validate()?;
    let p = params.normalized();
    let nm = p.n_m() as f64;
    let nd = p.n_detector as f64;
    let m = p.m as f64;
    let pp = p.purcell();
    let mut r = AnalyticReport::default();

    let omega_c = (nm * p.gamma_1d * p.gamma_star).sqrt();
    let omega_e = ((nd + m + 1.0) * p.gamma_1d * p.gamma_star).sqrt();
    let zeno_c = omega_c / (nm * p.gamma_1d) < ZENO_RATIO_LIMIT;
    let zeno_e = omega_e / (nd * p.gamma_1d) < ZENO_RATIO_LIMIT;

    let p_c = nm / (nm + 1.0) * exp(-PI / pp.sqrt());
    let p_e = nd / (nd + m + 1.0) * exp(-PI / ((m + 1.0) * pp).sqrt());
    let p_c_star = p.alpha * PI / (2.0 * nm * pp.sqrt());

    r.push("optimal_omega_c", omega_c * params.gamma_star, "sqrt(N_m G1d G*)", Quantity::Rate, zeno_c);
    r.push("optimal_time_c", PI / (p.gamma_1d * p.gamma_star).sqrt() / params.gamma_star, "pi/sqrt(G1d G*)", Quantity::Time, zeno_c);
    r.push("optimal_omega_e", omega_e * params.gamma_star, "sqrt((N_d+m+1) G1d G*)", Quantity::Rate, zeno_e);
    r.push(
        "optimal_time_e",
        PI / ((m + 1.0) * p.gamma_1d * p.gamma_star).sqrt() / params.gamma_star,
        "pi/sqrt((m+1) G1d G*)",
        Quantity::Time,
        zeno_e,
    );
    r.push("p_c", p_c, "N_m/(N_m+1) exp(-pi/sqrt(P))", Quantity::Probability, zeno_c);
    r.push("p_e", p_e, "N_d/(N_d+m+1) exp(-pi/sqrt((m+1)P))", Quantity::Probability, zeno_e);
    r.push("p_step", p_c * p_e, "p_c p_e", Quantity::Probability, zeno_c && zeno_e);
    r.push("p_c_star", p_c_star, "alpha pi/(2 N_m sqrt(P))", Quantity::Probability, zeno_c);
    r.push("p_cumulative", exp(-2.0 * PI * m / pp.sqrt()), "exp(-2 pi m/sqrt(P))", Quantity::Probability, true);
    r.push("infidelity_cumulative", m * p_c_star, "m p_c*", Quantity::Probability, true);
    r.push("zeno_ratio_c", omega_c / (nm * p.gamma_1d), "Omega_c/(N_m G1d)", Quantity::Scalar, zeno_c);
    Ok(r)
}

/// `Γ* ∫_0^T |ψ1|²` for the protocol 2 exchange step, in closed form.
pub fn protocol2_p_e_star_exact(params: &EnsembleParams) -> f64 {
    let p = params.normalized();
    let (a, g) = (p.gamma_star, p.gamma_1d);
    let t = 1.0 / g;
    let term = |rate: f64| (1.0 - (-rate * t).exp()) / rate;
    a * 0.25 * (term(a) + 2.0 * term(a + g) + term(a + 2.0 * g))
}

/// Probability of a collective jump during the protocol 2 exchange window.
pub fn protocol2_collective_jump_exact(params: &EnsembleParams) -> f64 {
    let p = params.normalized();
    let (a, g) = (p.gamma_star, p.gamma_1d);
    let rate = a + 2.0 * g;
    g * (1.0 - (-rate / g).exp()) / rate
}

/// The constant quoted for the collective-jump share of protocol 2 failures.
pub const PROTOCOL2_P_COLL_QUOTED: f64 = 0.71;

pub fn analytics_protocol2(params: &EnsembleParams) -> Result<AnalyticReport> {
    params.validate()?;
    let p = params.normalized();
    let nm = p.n_m() as f64;
    let n = p.n_target as f64;
    let m = p.m as f64;
    let pp = p.purcell();
    let e = std::f64::consts::E;
    let mut r = AnalyticReport::default();

    let p_c = nm / (nm + 1.0) * exp(-PI / pp.sqrt());
    let exchange = (e - 1.0).powi(2) / (4.0 * e * e);
    let q = exchange * exp(-1.0 / pp) * p_c;
    let q_lin = 0.1 * (1.0 - 1.0 / pp) * p_c;
    let p_c_star = p.alpha * PI / (2.0 * nm * pp.sqrt());
    let p_e_star = protocol2_p_e_star_exact(&p);
    let p_pump = 1.0 / (nm * pp);
    let eps = (p_c_star + p_e_star + p_pump) * m / n;
    let zeno_c = (nm * p.gamma_1d).sqrt().recip() * p.gamma_star.sqrt() < ZENO_RATIO_LIMIT;

    r.push("exchange_time", 1.0 / p.gamma_1d / params.gamma_star, "1/G1d", Quantity::Time, true);
    r.push("p_exchange", exchange * exp(-1.0 / pp), "(e-1)^2/(4e^2) exp(-1/P)", Quantity::Probability, true);
    r.push("q_step", q, "(e-1)^2/(4e^2) exp(-1/P) p_c", Quantity::Probability, zeno_c);
    r.push("q_step_linearized", q_lin, "0.1(1-1/P) N_m/(N_m+1) exp(-pi/sqrt(P))", Quantity::Probability, zeno_c);
    r.push("p_c_star", p_c_star, "alpha pi/(2 N_m sqrt(P))", Quantity::Probability, zeno_c);
    r.push("p_e_star", p_e_star, "G* int_0^Tf |psi1|^2", Quantity::Probability, true);
    r.push("p_e_star_approx", 0.67 / pp, "0.67/P", Quantity::Probability, pp > 10.0);
    r.push("p_coll", PROTOCOL2_P_COLL_QUOTED, "quoted constant", Quantity::Probability, true);
    r.push("p_coll_window", protocol2_collective_jump_exact(&p), "G1d int_0^Tf |psi1+psi2|^2", Quantity::Probability, true);
    r.push_full("p_pump_star", p_pump, "1/(N_m P)", Quantity::Probability, true, true);
    r.push_full("epsilon_star", eps, "(p_c*+p_e*+p_pump*) m/N", Quantity::Probability, true, true);
    r.push_full("infidelity_step", p_c_star + eps / q, "p_c* + eps*/q", Quantity::Scalar, true, zeno_c);
    r.push("infidelity_bound", 10.0 * m * exp(-PI / pp.sqrt()) / (n * pp), "10 m exp(-pi/sqrt(P))/(N P)", Quantity::Scalar, true);
    Ok(r)
}

/// Protocol 3 parameters with the balanced mode ratio `(N_m+1)/2` filled in
/// when the second guided-mode rate is missing.
pub fn protocol3_params(params: &EnsembleParams) -> Result<EnsembleParams> {
    if params.gamma_1d_s.is_some() {
        return Ok(*params);
    }
    params.with_mode_ratio(params.balanced_mode_ratio())
}

pub fn analytics_protocol3(params: &EnsembleParams) -> Result<AnalyticReport> {
    params.validate()?;
    let p = protocol3_params(&params.normalized())?;
    let nm = p.n_m() as f64;
    let n = p.n_target as f64;
    let m = p.m as f64;
    let pp = p.purcell();
    let ps = p.gamma_1d_s.expect("filled in above") / p.gamma_star;
    let mut r = AnalyticReport::default();

    let omega = (nm * p.gamma_1d * p.gamma_star / 3.0).sqrt();
    let zeno = omega / (nm * p.gamma_1d) < ZENO_RATIO_LIMIT;
    let p_step = nm / (nm + 2.0) * exp(-3f64.sqrt() * PI / pp.sqrt());
    let p_star = PI * 3f64.sqrt() / (2.0 * nm * pp.sqrt());
    let p_pump = 1.0 / (n * pp);

    r.push("optimal_omega", omega * params.gamma_star, "sqrt(N_m G1d G*/3)", Quantity::Rate, zeno);
    r.push("optimal_time", PI * 3f64.sqrt() / (p.gamma_1d * p.gamma_star).sqrt() / params.gamma_star, "pi sqrt(3)/sqrt(G1d G*)", Quantity::Time, zeno);
    r.push("mode_ratio", ps / pp, "G1d_s/G1d_g", Quantity::Scalar, true);
    r.push("p_step", p_step, "N_m/(N_m+2) exp(-sqrt(3) pi/sqrt(P))", Quantity::Probability, zeno);
    r.push("p_star", p_star, "pi sqrt(3)/(2 N_m sqrt(P))", Quantity::Probability, zeno);
    r.push_full("p_pump_star", p_pump, "1/(N P)", Quantity::Probability, true, true);
    r.push_full("infidelity_step", (p_star + p_pump) * (m / nm) / p_step, "(p*+p_pump*)(m/N_m)/p", Quantity::Scalar, true, zeno);
    r.push_full("infidelity_step_n", (p_star + p_pump) * (m / n) / p_step, "(p*+p_pump*)(m/N)/p", Quantity::Scalar, true, zeno);
    r.push("infidelity_scaling_nm", m / (nm * nm * pp.sqrt()), "m/(N_m^2 sqrt(P))", Quantity::Scalar, true);
    r.push("infidelity_scaling_n", m / (n * n * pp.sqrt()), "m/(N^2 sqrt(P))", Quantity::Scalar, true);
    r.push(
        "p_step_rescaled",
        nm / (nm + 2.0) * exp(-3f64.sqrt() * PI * (nm / 2.0).sqrt() / ps.sqrt()),
        "N_m/(N_m+2) exp(-sqrt(3) pi sqrt(N_m/2)/sqrt(P_s))",
        Quantity::Probability,
        zeno,
    );
    r.push("infidelity_rescaled", m * 2f64.sqrt() / (nm.powf(1.5) * ps.sqrt()), "m sqrt(2)/(N_m^1.5 sqrt(P_s))", Quantity::Scalar, true);
    Ok(r)
}

pub fn analytics_zeno_errors(p: &ZenoStepParams) -> Result<AnalyticReport> {
    p.validate()?;
    let k1 = (p.k + 1) as f64;
    let nb = p.n_b as f64;
    let s = p.collective_factor();
    let pp = p.purcell();
    let zeno = p.in_zeno_regime();
    let edge = 1.0 - exp(-PI / (k1 * pp).sqrt());
    let tail = exp(-PI * s / (k1 * pp).sqrt());
    let mut r = AnalyticReport::default();

    r.push("optimal_omega", p.optimal_omega(), "sqrt((N_b+k+1) G1d G*)", Quantity::Rate, true);
    r.push("optimal_time", p.optimal_time(), "pi/sqrt((k+1) G1d G*)", Quantity::Time, true);
    r.push("success_probability", nb / s * exp(-PI / (k1 * pp).sqrt()), "N_b/(N_b+k+1) exp(-pi/sqrt((k+1)P))", Quantity::Probability, zeno);
    r.push("p_a1_star", 0.5 * edge, "(1/2)(1-exp(-pi/sqrt((k+1)P)))", Quantity::Probability, zeno);
    r.push("p_a1_star_asymptotic", PI / (2.0 * pp.sqrt()), "pi/(2 sqrt(P))", Quantity::Probability, zeno);
    r.push("p_b1_star", k1 / (2.0 * nb) * edge, "((k+1)/(2 N_b))(1-exp(-pi/sqrt((k+1)P)))", Quantity::Probability, zeno);
    r.push("p_b1_star_asymptotic", PI * k1.sqrt() / (2.0 * nb * pp.sqrt()), "pi sqrt(k+1)/(2 N_b sqrt(P))", Quantity::Probability, zeno);
    let a2 = k1 / (s * s * pp) * tail;
    let b2 = nb / (s * s * pp) * tail;
    r.push("p_a2_star", a2, "(k+1)/((N_b+k+1)^2 P) exp(-pi(N_b+k+1)/sqrt((k+1)P))", Quantity::Probability, zeno);
    r.push("p_b2_star", b2, "N_b/((N_b+k+1)^2 P) exp(-pi(N_b+k+1)/sqrt((k+1)P))", Quantity::Probability, zeno);
    let leading = 0.5 * edge + k1 / (2.0 * nb) * edge;
    r.push("tails_negligible", f64::from(u8::from(a2 + b2 < 1e-2 * leading)), "p_a2+p_b2 < 1% of p_a1+p_b1", Quantity::Scalar, true);
    r.push("zeno_ratio", p.zeno_ratio(), "Omega/(N_b G1d)", Quantity::Scalar, zeno);
    Ok(r)
}

/// Two-photon suppression of the c-e1 channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Suppression {
    /// `α = Ω_1² / (4Δ²)`.
    pub alpha: f64,
    /// `Ω_a = Ω_1 Ω_2 / (4Δ)` when the second drive is given.
    pub effective_drive: Option<f64>,
    /// Whether `|Δ| ≥ 10 |Ω_1|`, where the formula is reliable.
    pub far_detuned: bool,
}

pub fn suppression_factor(omega_1: f64, delta_a: f64, omega_2: Option<f64>) -> Result<Suppression> {
    if delta_a == 0.0 || !delta_a.is_finite() {
        return Err(invalid("delta_a", "detuning must be non-zero and finite"));
    }
    let far = delta_a.abs() >= 10.0 * omega_1.abs();
    if !far {
        log::warn!("suppression factor used with |Δ/Ω_1| = {:.2} < 10", (delta_a / omega_1).abs());
    }
    Ok(Suppression {
        alpha: omega_1 * omega_1 / (4.0 * delta_a * delta_a),
        effective_drive: omega_2.map(|o2| omega_1 * o2 / (4.0 * delta_a)),
        far_detuned: far,
    })
}

/// `Ω_1/Δ` needed for a target suppression factor.
pub fn drive_ratio_for_alpha(alpha: f64) -> Result<f64> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(invalid("alpha", "must be non-negative"));
    }
    Ok(2.0 * alpha.sqrt())
}

// ---------------------------------------------------------------------------
// Exact counterparts

/// Goal population after evolving the initial state for `t`.
pub fn goal_population(h: &EffectiveHamiltonian, t: f64) -> Result<f64> {
    let psi = propagate(h, &h.initial_state(), t)?;
    Ok(psi[h.basis().goal()].norm_sqr())
}

/// Maximizes the exact goal population over `[t_guess/2, 3 t_guess/2]`.
pub fn refine_optimal_time(h: &EffectiveHamiltonian, t_guess: f64) -> Result<Extremum> {
    let mut failure = None;
    let best = golden_max(
        |t| match goal_population(h, t) {
            Ok(p) => p,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NEG_INFINITY
            }
        },
        0.5 * t_guess,
        1.5 * t_guess,
        1e-4,
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(best),
    }
}

/// Drive and time at the analytic optimum of a step.
pub fn analytic_operating_point(step: ProtocolStep, params: &EnsembleParams) -> Result<(f64, f64)> {
    let p = params.normalized();
    let g = params.gamma_star;
    match step {
        ProtocolStep::P1StepC => {
            let r = analytics_protocol1(&p)?;
            Ok((r.value("optimal_omega_c") * g, r.value("optimal_time_c") / g))
        }
        ProtocolStep::P1StepE => {
            let r = analytics_protocol1(&p)?;
            Ok((r.value("optimal_omega_e") * g, r.value("optimal_time_e") / g))
        }
        ProtocolStep::GeneralZeno(k) => {
            let z = ZenoStepParams { n_a: p.n_target, n_b: p.n_detector, k, gamma_1d: p.gamma_1d, gamma_star: 1.0, omega: 0.0 };
            Ok((z.optimal_omega() * g, z.optimal_time() / g))
        }
        ProtocolStep::P2StepE => Ok((0.0, 1.0 / params.gamma_1d)),
        ProtocolStep::P3StepB => {
            let r = analytics_protocol3(&p)?;
            Ok((r.value("optimal_omega") * g, r.value("optimal_time") / g))
        }
    }
}

/// Exact step success at the analytic optimum, with the refined maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactOptimum {
    pub omega: f64,
    pub analytic_time: f64,
    pub at_analytic_time: f64,
    pub refined_time: f64,
    pub refined: f64,
}

pub fn exact_optimum(step: ProtocolStep, params: &EnsembleParams) -> Result<ExactOptimum> {
    let params = if step == ProtocolStep::P3StepB { protocol3_params(params)? } else { *params };
    let (omega, t) = analytic_operating_point(step, &params)?;
    let h = step_hamiltonian(step, &params, omega)?;
    let at = goal_population(&h, t)?;
    let best = refine_optimal_time(&h, t)?;
    Ok(ExactOptimum { omega, analytic_time: t, at_analytic_time: at, refined_time: best.x, refined: best.value })
}

/// Jump probability split into the driven window and the decay tail after
/// the laser is switched off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpSplit {
    pub on_window: f64,
    pub tail: f64,
}

impl JumpSplit {
    pub fn total(&self) -> f64 {
        self.on_window + self.tail
    }
}

/// `rate ∫ Σ w_i |c_i|²` over `[0, t]` with the drive on, plus the tail over
/// `10 / (collective rate)` with the drive off.
pub fn exact_jump_error(
    step: ProtocolStep,
    params: &EnsembleParams,
    omega: f64,
    t: f64,
    weights: &[(usize, f64)],
    rate: f64,
) -> Result<JumpSplit> {
    let on = step_hamiltonian(step, params, omega)?;
    let traj = trajectory(&on, &on.initial_state(), &[0.0, t])?;
    let on_window = dynamics::jump_integral(&traj, weights, rate)?;
    if step == ProtocolStep::P2StepE {
        return Ok(JumpSplit { on_window, tail: 0.0 });
    }
    let off = step_hamiltonian(step, params, 0.0)?;
    let structure = step_structure(step, params)?;
    let collective = structure
        .channels
        .iter()
        .map(|c| c.rate * c.row.iter().map(|x| x * x).sum::<f64>())
        .fold(0.0, f64::max);
    let psi_t = traj.amplitudes(1).clone();
    let tail_traj = off_trajectory(&off, psi_t, 10.0 / collective)?;
    let tail = dynamics::jump_integral(&tail_traj, weights, rate)?;
    Ok(JumpSplit { on_window, tail })
}

fn off_trajectory(h: &EffectiveHamiltonian, psi: nalgebra::DVector<C64>, window: f64) -> Result<dynamics::Trajectory> {
    // `trajectory` expects a normalized start; evolve the normalized state
    // and rescale the populations through the weight instead.
    let n = crate::linalg::norm_sqr(&psi);
    if n == 0.0 {
        return dynamics::Trajectory::from_samples(
            h.basis().labels().to_vec(),
            vec![0.0, window],
            vec![psi.clone(), psi],
        );
    }
    let unit = &psi / C64::new(n.sqrt(), 0.0);
    let traj = trajectory(h, &unit, &dynamics::uniform_grid(window, 2))?;
    Ok(traj.scaled(n))
}

/// Leaky emission on the c-e1 channel during step (c), at its analytic
/// operating point.
pub fn exact_p_c_star(params: &EnsembleParams) -> Result<JumpSplit> {
    let (omega, t) = analytic_operating_point(ProtocolStep::P1StepC, params)?;
    exact_jump_error(ProtocolStep::P1StepC, params, omega, t, &[(1, 1.0)], params.alpha * params.gamma_star)
}

/// Free-space emission from the excited target in protocol 3.
pub fn exact_p3_star(params: &EnsembleParams) -> Result<JumpSplit> {
    let p = protocol3_params(params)?;
    let (omega, t) = analytic_operating_point(ProtocolStep::P3StepB, &p)?;
    exact_jump_error(ProtocolStep::P3StepB, &p, omega, t, &[(1, 1.0)], p.gamma_star)
}

/// Free-space emission from the target during the protocol 2 exchange.
pub fn exact_p2_e_star(params: &EnsembleParams) -> Result<f64> {
    let t = 1.0 / params.gamma_1d;
    Ok(exact_jump_error(ProtocolStep::P2StepE, params, 0.0, t, &[(0, 1.0)], params.gamma_star)?.on_window)
}
