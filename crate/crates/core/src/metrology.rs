//! Two-mode probe states and their phase sensitivity.
//!
//! The quantum Fisher information of a pure probe under `e^{-iφG}` is
//! `4 Var(G)`; the error-propagation sensitivity of an observable `O` is
//! `ΔO / |∂⟨O⟩/∂φ|`. Their ordering is the Cramér-Rao bound.

use std::f64::consts::PI;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use num_complex::Complex64 as C64;

use crate::dynamics::fmt12;
use crate::error::{invalid, Error, Result};
use crate::merging::{balanced_beamsplitter, TwoModeState};

/// Finite-difference step of the signal derivative.
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub enum StateKind {
    /// `|m, m⟩`.
    DualFock(usize),
    /// 50:50 beamsplitter applied to `|m, m⟩`.
    HollandBurnett(usize),
    /// `(|m, m-1⟩ + |m-1, m⟩)/√2`.
    Yurke(usize),
    /// `(|n, 0⟩ + |0, n⟩)/√2`.
    Noon(usize),
    /// `|n, 0⟩`, the classical benchmark.
    SingleMode(usize),
}

impl StateKind {
    pub fn total_number(&self) -> usize {
        match *self {
            StateKind::DualFock(m) | StateKind::HollandBurnett(m) => 2 * m,
            StateKind::Yurke(m) => 2 * m - 1,
            StateKind::Noon(n) | StateKind::SingleMode(n) => n,
        }
    }
}

pub fn make_state(kind: &StateKind) -> Result<TwoModeState> {
    let s = 0.5f64.sqrt();
    match *kind {
        StateKind::DualFock(m) => {
            positive("m", m)?;
            TwoModeState::fock(m, m, 2 * m)
        }
        StateKind::HollandBurnett(m) => {
            positive("m", m)?;
            balanced_beamsplitter(&TwoModeState::fock(m, m, 2 * m)?)
        }
        StateKind::Yurke(m) => {
            positive("m", m)?;
            let n = 2 * m - 1;
            TwoModeState::from_terms(n, &[(m, m - 1, C64::new(s, 0.0)), (m - 1, m, C64::new(s, 0.0))])
        }
        StateKind::Noon(n) => {
            positive("n", n)?;
            TwoModeState::from_terms(n, &[(n, 0, C64::new(s, 0.0)), (0, n, C64::new(s, 0.0))])
        }
        StateKind::SingleMode(n) => {
            positive("n", n)?;
            TwoModeState::fock(n, 0, n)
        }
    }
}

fn positive(name: &'static str, v: usize) -> Result<()> {
    if v == 0 {
        return Err(invalid(name, "must be positive"));
    }
    Ok(())
}

/// Phases `e^{iφ_j} = -e^{iπ(2j+1)/n}` that factor `a↑†ⁿ + a↓†ⁿ`.
pub fn noon_phases(n: usize) -> Vec<f64> {
    (0..n).map(|j| PI * (2 * j + 1) as f64 / n as f64 + PI).collect()
}

/// `∏_j (a↑† + e^{iφ_j} a↓†)|0,0⟩`, normalized.
pub fn noon_product_form(phases: &[f64]) -> Result<TwoModeState> {
    if phases.is_empty() {
        return Err(invalid("phases", "need at least one factor"));
    }
    let mut s = TwoModeState::vacuum(0);
    for &p in phases {
        s = s.create(C64::new(1.0, 0.0), C64::from_polar(1.0, p));
    }
    s.normalized()
}

/// Maps `(|m, m-1⟩ - |m-1, m⟩)/√2` onto the Yurke state with
/// `exp(-iπ a↑†a↑)`.
pub fn parity_phase_shift(state: &TwoModeState) -> TwoModeState {
    state.map_diagonal(|u, _| if u % 2 == 0 { C64::new(1.0, 0.0) } else { C64::new(-1.0, 0.0) })
}

/// Phase generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generator {
    NUp,
    NDown,
    /// `(n↑ - n↓)/2`.
    HalfDifference,
    /// 50:50 beamsplitter followed by `e^{-iφ(n↑-n↓)/2}`: a Mach-Zehnder arm
    /// phase.
    Interferometer,
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Generator::NUp => "N_UP",
            Generator::NDown => "N_DOWN",
            Generator::HalfDifference => "HALF_DIFFERENCE",
            Generator::Interferometer => "INTERFEROMETER",
        })
    }
}

impl FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "N_UP" => Ok(Generator::NUp),
            "N_DOWN" => Ok(Generator::NDown),
            "HALF_DIFFERENCE" => Ok(Generator::HalfDifference),
            "INTERFEROMETER" => Ok(Generator::Interferometer),
            _ => Err(invalid("generator", format!("unknown generator `{s}`"))),
        }
    }
}

fn generator_eigenvalue(g: Generator, u: usize, d: usize) -> f64 {
    match g {
        Generator::NUp => u as f64,
        Generator::NDown => d as f64,
        Generator::HalfDifference | Generator::Interferometer => 0.5 * (u as f64 - d as f64),
    }
}

/// A probe state with its phase generator.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseProbe {
    pub state: TwoModeState,
    pub generator: Generator,
    pub n_total: usize,
}

impl PhaseProbe {
    pub fn new(state: TwoModeState, generator: Generator) -> Result<Self> {
        let n_total = state.total_number().ok_or_else(|| invalid("state", "not a photon-number eigenstate"))?;
        if (state.norm_sqr() - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized(state.norm_sqr()));
        }
        Ok(Self { state, generator, n_total })
    }

    pub fn from_kind(kind: &StateKind, generator: Generator) -> Result<Self> {
        Self::new(make_state(kind)?, generator)
    }

    /// State on which the diagonal phase acts.
    fn prepared(&self) -> Result<TwoModeState> {
        match self.generator {
            Generator::Interferometer => balanced_beamsplitter(&self.state),
            _ => Ok(self.state.clone()),
        }
    }

    /// The state after accumulating phase `φ`.
    pub fn evolve(&self, phi: f64) -> Result<TwoModeState> {
        let g = self.generator;
        Ok(self.prepared()?.map_diagonal(|u, d| C64::from_polar(1.0, -phi * generator_eigenvalue(g, u, d))))
    }
}

/// `F_Q` and the bound `1/√F_Q` (infinite when `F_Q = 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherInformation {
    pub f_q: f64,
    pub delta_phi_min: f64,
}

pub fn quantum_fisher_information(probe: &PhaseProbe) -> Result<FisherInformation> {
    let s = probe.prepared()?;
    let (mut m1, mut m2) = (0.0, 0.0);
    for (u, d, a) in s.terms() {
        let p = a.norm_sqr();
        let g = generator_eigenvalue(probe.generator, u, d);
        m1 += p * g;
        m2 += p * g * g;
    }
    let f_q = (4.0 * (m2 - m1 * m1)).max(0.0);
    let f_q = if f_q < 1e-12 * (1.0 + m2) { 0.0 } else { f_q };
    Ok(FisherInformation { f_q, delta_phi_min: if f_q > 0.0 { 1.0 / f_q.sqrt() } else { f64::INFINITY } })
}

/// Observable catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    Jx,
    Jy,
    Jz,
    NDiff,
}

impl Observable {
    pub const ALL: [Observable; 4] = [Observable::Jx, Observable::Jy, Observable::Jz, Observable::NDiff];
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Observable::Jx => "J_x",
            Observable::Jy => "J_y",
            Observable::Jz => "J_z",
            Observable::NDiff => "N_diff",
        })
    }
}

/// `O|ψ⟩`.
pub fn apply_observable(obs: Observable, state: &TwoModeState) -> Result<TwoModeState> {
    let cutoff = state.cutoff();
    let mut terms = Vec::new();
    for (u, d, a) in state.terms() {
        if a == C64::new(0.0, 0.0) {
            continue;
        }
        match obs {
            Observable::Jz => terms.push((u, d, a * (0.5 * (u as f64 - d as f64)))),
            Observable::NDiff => terms.push((u, d, a * (u as f64 - d as f64))),
            Observable::Jx | Observable::Jy => {
                // J_x = (a↑†a↓ + a↓†a↑)/2, J_y = (a↑†a↓ - a↓†a↑)/2i
                let down = if obs == Observable::Jx { C64::new(0.5, 0.0) } else { C64::new(0.0, 0.5) };
                if d > 0 {
                    if u + 1 > cutoff {
                        return Err(Error::CutoffOverflow { cutoff, required: u + 1 });
                    }
                    let up = if obs == Observable::Jx { C64::new(0.5, 0.0) } else { C64::new(0.0, -0.5) };
                    terms.push((u + 1, d - 1, a * up * (((u + 1) * d) as f64).sqrt()));
                }
                if u > 0 {
                    if d + 1 > cutoff {
                        return Err(Error::CutoffOverflow { cutoff, required: d + 1 });
                    }
                    terms.push((u - 1, d + 1, a * down * ((u * (d + 1)) as f64).sqrt()));
                }
            }
        }
    }
    TwoModeState::from_terms(cutoff, &terms)
}

/// `(⟨O⟩, Var O)` in a normalized state.
pub fn moments(obs: Observable, state: &TwoModeState) -> Result<(f64, f64)> {
    let o = apply_observable(obs, state)?;
    let mean = state.inner(&o).re;
    let second = o.norm_sqr();
    Ok((mean, (second - mean * mean).max(0.0)))
}

/// `√Var(O) / |∂⟨O⟩/∂φ|` at phase `φ`; infinite when the signal is flat.
pub fn error_propagation_sensitivity(probe: &PhaseProbe, obs: Observable, phi: f64) -> Result<f64> {
    let mean = |p: f64| -> Result<f64> { Ok(moments(obs, &probe.evolve(p)?)?.0) };
    let h = FD_STEP;
    let d1 = (mean(phi + h)? - mean(phi - h)?) / (2.0 * h);
    let d2 = (mean(phi + 2.0 * h)? - mean(phi - 2.0 * h)?) / (4.0 * h);
    let slope = (4.0 * d1 - d2) / 3.0;
    let scale = probe.n_total.max(1) as f64;
    if (d1 - d2).abs() > 1e-4 * (d1.abs() + 1e-9 * scale) {
        log::debug!("finite-difference check loose at φ = {phi}: {d1} vs {d2}");
    }
    let (_, var) = moments(obs, &probe.evolve(phi)?)?;
    if slope.abs() <= 1e-9 * scale {
        return Ok(f64::INFINITY);
    }
    Ok(var.sqrt() / slope.abs())
}

/// One point of a sensitivity scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanPoint {
    pub n: usize,
    pub phi: f64,
    pub observable: Observable,
    pub delta_phi: f64,
    pub qfi_bound: f64,
}

pub fn sensitivity_scan(probe: &PhaseProbe, observables: &[Observable], phis: &[f64]) -> Result<Vec<ScanPoint>> {
    let bound = quantum_fisher_information(probe)?.delta_phi_min;
    let mut out = Vec::with_capacity(phis.len() * observables.len());
    for &phi in phis {
        for &obs in observables {
            out.push(ScanPoint {
                n: probe.n_total,
                phi,
                observable: obs,
                delta_phi: error_propagation_sensitivity(probe, obs, phi)?,
                qfi_bound: bound,
            });
        }
    }
    Ok(out)
}

/// Smallest finite `Δφ` in a scan.
pub fn best_point(scan: &[ScanPoint]) -> Option<ScanPoint> {
    scan.iter().copied().filter(|p| p.delta_phi.is_finite()).min_by(|a, b| a.delta_phi.total_cmp(&b.delta_phi))
}

/// CSV `n,phi,observable,delta_phi,qfi_bound`.
pub fn scan_csv(scan: &[ScanPoint]) -> String {
    let mut out = String::from("n,phi,observable,delta_phi,qfi_bound\n");
    for p in scan {
        let _ = writeln!(out, "{},{},{},{},{}", p.n, fmt12(p.phi), p.observable, fmt12(p.delta_phi), fmt12(p.qfi_bound));
    }
    out
}

/// `n` equally spaced phases on `[-half_width, half_width]`.
pub fn phase_grid(half_width: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![0.0];
    }
    (0..n).map(|i| -half_width + 2.0 * half_width * i as f64 / (n - 1) as f64).collect()
}

/// Quoted closed-form precision of each probe at total photon number `n`.
pub fn claimed_delta_phi(kind: &StateKind) -> Option<f64> {
    let n = kind.total_number() as f64;
    match kind {
        StateKind::Noon(_) => Some(1.0 / n),
        StateKind::HollandBurnett(_) => Some(1.0 / (n * (1.0 + n / 2.0)).sqrt()),
        StateKind::Yurke(_) => Some(2.0 / n),
        StateKind::SingleMode(_) => Some(1.0 / n.sqrt()),
        StateKind::DualFock(_) => None,
    }
}
