//! Parameter records and the labeled few-state bases of each protocol step.
//!
//! Every step of the protocols moves a single shared excitation between
//! collective states of the source atom, the target ensemble and the
//! detector. Inside that single-excitation manifold the no-jump dynamics
//! closes on two to four symmetric states, described here by a
//! [`StepStructure`]: the basis, which labels carry an excitation, the
//! collective decay rows `ℓ` (so that a channel contributes
//! `-(i/2)·rate·ℓ†ℓ`), and the pair of labels coupled by the laser.
//!
//! Basis labels are occupation strings. Each register is written as
//! `name:` followed by `level^count` tokens in a fixed level order, joined
//! by `.` and omitting empty levels, e.g. `src:g|tgt:g^99.e1`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

use crate::error::{invalid, Error, Result};

/// The physical knobs shared by every formula. Rates are in units of Γ*
/// once normalized, but the record itself accepts any consistent unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleParams {
    /// N, atoms in the target ensemble.
    pub n_target: u32,
    /// N_d, atoms in the detector ensemble.
    pub n_detector: u32,
    /// Excitations already stored in the target.
    pub m: u32,
    pub gamma_1d: f64,
    pub gamma_star: f64,
    /// Suppression of the c-e1 emission channel, Γ_c = α Γ*.
    pub alpha: f64,
    /// Decay rate into the second guided mode (protocol 3 only). In that
    /// protocol `gamma_1d` plays the role of the first mode's rate.
    pub gamma_1d_s: Option<f64>,
}

impl EnsembleParams {
    /// Normalized record with Γ* = 1, Γ_1d = P_1d, α = 1.
    pub fn new(n_target: u32, n_detector: u32, m: u32, purcell: f64) -> Result<Self> {
        let p = Self {
            n_target,
            n_detector,
            m,
            gamma_1d: purcell,
            gamma_star: 1.0,
            alpha: 1.0,
            gamma_1d_s: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        self.alpha = alpha;
        self.validate()?;
        Ok(self)
    }

    /// Sets the second guided-mode rate from the ratio Γ_1d^s / Γ_1d^g.
    pub fn with_mode_ratio(mut self, ratio: f64) -> Result<Self> {
        self.gamma_1d_s = Some(ratio * self.gamma_1d);
        self.validate()?;
        Ok(self)
    }

    /// The ratio Γ_1d^s/Γ_1d^g = (N_m + 1)/2 that equalizes the two
    /// superradiant channels of protocol 3.
    pub fn balanced_mode_ratio(&self) -> f64 {
        (self.n_m() as f64 + 1.0) / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_target == 0 {
            return Err(invalid("n_target", "must be positive"));
        }
        if self.n_detector == 0 {
            return Err(invalid("n_detector", "must be positive"));
        }
        if self.m >= self.n_target {
            return Err(invalid("m", format!("m = {} must be below N = {}", self.m, self.n_target)));
        }
        for (name, v) in [("gamma_1d", self.gamma_1d), ("gamma_star", self.gamma_star)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("{v} is not a positive rate")));
            }
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(invalid("alpha", format!("{} is outside (0, 1]", self.alpha)));
        }
        if let Some(gs) = self.gamma_1d_s {
            if !(gs.is_finite() && gs > 0.0) {
                return Err(invalid("gamma_1d_s", format!("{gs} is not a positive rate")));
            }
        }
        Ok(())
    }

    /// P_1d = Γ_1d / Γ*.
    pub fn purcell(&self) -> f64 {
        self.gamma_1d / self.gamma_star
    }

    /// N_m = N - m, the number of target atoms still in g.
    pub fn n_m(&self) -> u32 {
        self.n_target - self.m
    }

    /// The same physics with Γ* = 1.
    pub fn normalized(&self) -> Self {
        let g = self.gamma_star;
        Self {
            gamma_1d: self.gamma_1d / g,
            gamma_star: 1.0,
            gamma_1d_s: self.gamma_1d_s.map(|s| s / g),
            ..*self
        }
    }

    fn gamma_s(&self) -> Result<f64> {
        self.gamma_1d_s
            .ok_or_else(|| invalid("gamma_1d_s", "protocol 3 needs the second guided-mode rate"))
    }
}

/// Protocol steps that involve the waveguide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProtocolStep {
    /// Protocol 1 (and 2) step (c): Zeno transfer from the source atom into the target.
    P1StepC,
    /// Protocol 1 step (e): Zeno transfer from the target into the detector.
    P1StepE,
    /// Protocol 2 step (e): free collective exchange between target and detector.
    P2StepE,
    /// Protocol 3 single step with two guided modes.
    P3StepB,
    /// Generalized two-ensemble Zeno step with `k` excitations already in
    /// level 1 of ensemble a. Ensemble a is the target, b the detector.
    GeneralZeno(u32),
}

impl ProtocolStep {
    pub const ALL_FIXED: [ProtocolStep; 4] =
        [ProtocolStep::P1StepC, ProtocolStep::P1StepE, ProtocolStep::P2StepE, ProtocolStep::P3StepB];

    pub fn has_zeno_structure(&self) -> bool {
        !matches!(self, ProtocolStep::P2StepE)
    }
}

impl fmt::Display for ProtocolStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProtocolStep::P1StepC => f.write_str("P1_stepC"),
            ProtocolStep::P1StepE => f.write_str("P1_stepE"),
            ProtocolStep::P2StepE => f.write_str("P2_stepE"),
            ProtocolStep::P3StepB => f.write_str("P3_stepB"),
            ProtocolStep::GeneralZeno(k) => write!(f, "APPENDIX_ZENO({k})"),
        }
    }
}

impl FromStr for ProtocolStep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t {
            "P1_stepC" => return Ok(ProtocolStep::P1StepC),
            "P1_stepE" => return Ok(ProtocolStep::P1StepE),
            "P2_stepE" => return Ok(ProtocolStep::P2StepE),
            "P3_stepB" | "P3" => return Ok(ProtocolStep::P3StepB),
            _ => {}
        }
        if let Some(inner) = t.strip_prefix("APPENDIX_ZENO(").and_then(|r| r.strip_suffix(')')) {
            if let Ok(k) = inner.trim().parse::<u32>() {
                return Ok(ProtocolStep::GeneralZeno(k));
            }
        }
        Err(Error::UnknownStep(s.to_string()))
    }
}

/// Ordered, unique state labels plus the designated initial and goal states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledBasis {
    labels: Vec<String>,
    initial: usize,
    goal: usize,
}

impl LabeledBasis {
    pub fn new(labels: Vec<String>, initial: usize, goal: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(invalid("labels", "basis must not be empty"));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(invalid("labels", format!("duplicate label {l}")));
            }
        }
        if initial >= labels.len() || goal >= labels.len() {
            return Err(invalid("labels", "initial/goal index outside the basis"));
        }
        Ok(Self { labels, initial, goal })
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn goal(&self) -> usize {
        self.goal
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// One collective decay channel restricted to the basis: the lowering
/// operator maps basis state `j` to a single common ground state with
/// amplitude `row[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CollectiveChannel {
    pub name: &'static str,
    pub rate: f64,
    pub row: Vec<f64>,
}

/// Everything needed to write down a step's effective Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct StepStructure {
    pub step: ProtocolStep,
    pub basis: LabeledBasis,
    /// Labels carrying an optically excited atom (decay Γ* each).
    pub excited: Vec<usize>,
    pub channels: Vec<CollectiveChannel>,
    /// Labels coupled by the laser with matrix element Ω/2.
    pub drive: Option<(usize, usize)>,
    pub gamma_star: f64,
}

fn register(name: &str, levels: &[(&str, u32)]) -> String {
    let body: Vec<String> = levels
        .iter()
        .filter(|(_, n)| *n > 0)
        .map(|(l, n)| if *n == 1 { (*l).to_string() } else { format!("{l}^{n}") })
        .collect();
    format!("{name}:{}", body.join("."))
}

fn label(regs: &[String]) -> String {
    regs.join("|")
}

/// The minimal closed basis of a step.
pub fn build_basis(step: ProtocolStep, params: &EnsembleParams) -> Result<LabeledBasis> {
    Ok(step_structure(step, params)?.basis)
}

/// Basis plus decay and drive structure of a step.
pub fn step_structure(step: ProtocolStep, params: &EnsembleParams) -> Result<StepStructure> {
    params.validate()?;
    let nm = params.n_m();
    let m = params.m;
    let g1 = params.gamma_1d;
    let gs = params.gamma_star;
    match step {
        ProtocolStep::P1StepC => {
            // src levels (g, e1, c); tgt levels (g, e1, c, s1)
            let tgt = |g, e, c| register("tgt", &[("g", g), ("e1", e), ("c", c), ("s1", m)]);
            let labels = vec![
                label(&[register("src", &[("e1", 1)]), tgt(nm, 0, 0)]),
                label(&[register("src", &[("g", 1)]), tgt(nm - 1, 1, 0)]),
                label(&[register("src", &[("g", 1)]), tgt(nm - 1, 0, 1)]),
            ];
            Ok(StepStructure {
                step,
                basis: LabeledBasis::new(labels, 0, 2)?,
                excited: vec![0, 1],
                channels: vec![CollectiveChannel {
                    name: "e1->g",
                    rate: g1,
                    row: vec![1.0, (nm as f64).sqrt(), 0.0],
                }],
                drive: Some((1, 2)),
                gamma_star: gs,
            })
        }
        ProtocolStep::P1StepE => zeno_structure(step, params.n_target, params.n_detector, m, g1, gs, "tgt", "det"),
        ProtocolStep::GeneralZeno(k) => {
            zeno_structure(step, params.n_target, params.n_detector, k, g1, gs, "a", "b")
        }
        ProtocolStep::P2StepE => {
            // tgt levels (g, s, e2, mem); det levels (s, e2)
            let tgt = |g, s, e| register("tgt", &[("g", g), ("s", s), ("e2", e), ("mem", m)]);
            let labels = vec![
                label(&[tgt(nm - 1, 0, 1), register("det", &[("s", 1)])]),
                label(&[tgt(nm - 1, 1, 0), register("det", &[("e2", 1)])]),
            ];
            Ok(StepStructure {
                step,
                basis: LabeledBasis::new(labels, 0, 1)?,
                excited: vec![0, 1],
                channels: vec![CollectiveChannel { name: "e2->s", rate: g1, row: vec![1.0, 1.0] }],
                drive: None,
                gamma_star: gs,
            })
        }
        ProtocolStep::P3StepB => {
            let g_s = params.gamma_s()?;
            // src levels (g, e, s); tgt levels (g, s, e, mem); det levels (g, s, e)
            let tgt = |g, s, e| register("tgt", &[("g", g), ("s", s), ("e", e), ("mem", m)]);
            let src_g = register("src", &[("g", 1)]);
            let labels = vec![
                label(&[register("src", &[("e", 1)]), tgt(nm, 0, 0), register("det", &[("s", 1)])]),
                label(&[src_g.clone(), tgt(nm - 1, 0, 1), register("det", &[("s", 1)])]),
                label(&[src_g.clone(), tgt(nm - 1, 1, 0), register("det", &[("e", 1)])]),
                label(&[src_g, tgt(nm - 1, 1, 0), register("det", &[("g", 1)])]),
            ];
            Ok(StepStructure {
                step,
                basis: LabeledBasis::new(labels, 0, 3)?,
                excited: vec![0, 1, 2],
                channels: vec![
                    CollectiveChannel {
                        name: "e->g",
                        rate: g1,
                        row: vec![1.0, (nm as f64).sqrt(), 0.0, 0.0],
                    },
                    CollectiveChannel { name: "e->s", rate: g_s, row: vec![0.0, 1.0, 1.0, 0.0] },
                ],
                drive: Some((2, 3)),
                gamma_star: gs,
            })
        }
    }
}

/// Two ensembles of three-level atoms (levels 0, 1, 2) with collective
/// decay 2 -> 1 and a drive 0 <-> 2 on ensemble b.
#[allow(clippy::too_many_arguments)]
fn zeno_structure(
    step: ProtocolStep,
    n_a: u32,
    n_b: u32,
    k: u32,
    gamma_1d: f64,
    gamma_star: f64,
    name_a: &str,
    name_b: &str,
) -> Result<StepStructure> {
    if k + 1 > n_a {
        return Err(invalid("k", format!("k = {k} needs at least k + 1 atoms in ensemble a (N_a = {n_a})")));
    }
    let a = |n0, n1, n2| register(name_a, &[("0", n0), ("1", n1), ("2", n2)]);
    let b = |n0, n1, n2| register(name_b, &[("0", n0), ("1", n1), ("2", n2)]);
    let rest = n_a - k - 1;
    let labels = vec![
        label(&[a(rest, k, 1), b(0, n_b, 0)]),
        label(&[a(rest, k + 1, 0), b(0, n_b - 1, 1)]),
        label(&[a(rest, k + 1, 0), b(1, n_b - 1, 0)]),
    ];
    Ok(StepStructure {
        step,
        basis: LabeledBasis::new(labels, 0, 2)?,
        excited: vec![0, 1],
        channels: vec![CollectiveChannel {
            name: "2->1",
            rate: gamma_1d,
            row: vec![((k + 1) as f64).sqrt(), (n_b as f64).sqrt(), 0.0],
        }],
        drive: Some((1, 2)),
        gamma_star,
    })
}

/// Dark and superradiant combinations of the excited labels.
///
/// Vectors have the full basis dimension and vanish on unexcited labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DickeCoefficients {
    pub dark: Vec<DVector<f64>>,
    pub superradiant: Vec<DVector<f64>>,
    /// Collective lowering rows, in channel order.
    pub lowering: Vec<DVector<f64>>,
}

impl DickeCoefficients {
    /// Overlap ⟨dark_0 | basis_i⟩.
    pub fn dark_overlap(&self, i: usize) -> f64 {
        self.dark[0][i]
    }
}

pub fn dark_superradiant_decomposition(step: ProtocolStep, params: &EnsembleParams) -> Result<DickeCoefficients> {
    if !step.has_zeno_structure() {
        return Err(Error::NoDissipativeStructure(step.to_string()));
    }
    let s = step_structure(step, params)?;
    let dim = s.basis.dim();
    let lowering: Vec<DVector<f64>> = s.channels.iter().map(|c| DVector::from_vec(c.row.clone())).collect();

    let mut superradiant: Vec<DVector<f64>> = Vec::new();
    for row in &lowering {
        if let Some(v) = orthonormal_remainder(row.clone(), &superradiant) {
            superradiant.push(v);
        }
    }
    let mut dark = Vec::new();
    let mut span = superradiant.clone();
    for &i in &s.excited {
        let mut e = DVector::zeros(dim);
        e[i] = 1.0;
        if let Some(v) = orthonormal_remainder(e, &span) {
            span.push(v.clone());
            dark.push(v);
        }
    }
    Ok(DickeCoefficients { dark, superradiant, lowering })
}

fn orthonormal_remainder(mut v: DVector<f64>, basis: &[DVector<f64>]) -> Option<DVector<f64>> {
    // two passes of modified Gram-Schmidt for stability
    for _ in 0..2 {
        for b in basis {
            let c = b.dot(&v);
            v.axpy(-c, b, 1.0);
        }
    }
    let n = v.norm();
    (n > 1e-8).then(|| v / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(n: u32, m: u32, p: f64) -> EnsembleParams {
        EnsembleParams::new(n, 100, m, p).unwrap().with_mode_ratio((n - m + 1) as f64 / 2.0).unwrap()
    }

    #[test]
    fn dimensions_per_step() {
        let p = params(100, 0, 100.0);
        assert_eq!(build_basis(ProtocolStep::P1StepC, &p).unwrap().dim(), 3);
        assert_eq!(build_basis(ProtocolStep::P1StepE, &p).unwrap().dim(), 3);
        assert_eq!(build_basis(ProtocolStep::P2StepE, &p).unwrap().dim(), 2);
        assert_eq!(build_basis(ProtocolStep::P3StepB, &p).unwrap().dim(), 4);
        assert_eq!(build_basis(ProtocolStep::GeneralZeno(3), &p).unwrap().dim(), 3);
    }

    #[test]
    fn stepc_labels_are_occupations() {
        let b = build_basis(ProtocolStep::P1StepC, &params(100, 0, 100.0)).unwrap();
        assert_eq!(b.labels(), ["src:e1|tgt:g^100", "src:g|tgt:g^99.e1", "src:g|tgt:g^99.c"]);
        assert_eq!(b.goal(), 2);
        assert!(b.labels().iter().all(|l| !l.contains(',')));
    }

    #[test]
    fn rejects_full_target() {
        assert!(EnsembleParams::new(5, 5, 5, 10.0).is_err());
        assert!(EnsembleParams::new(5, 5, 1, 10.0).unwrap().with_alpha(0.0).is_err());
    }

    #[test]
    fn step_tags_round_trip() {
        for s in [
            ProtocolStep::P1StepC,
            ProtocolStep::P1StepE,
            ProtocolStep::P2StepE,
            ProtocolStep::P3StepB,
            ProtocolStep::GeneralZeno(4),
        ] {
            assert_eq!(s.to_string().parse::<ProtocolStep>().unwrap(), s);
        }
        assert!(matches!("P4_stepZ".parse::<ProtocolStep>(), Err(Error::UnknownStep(_))));
    }

    #[test]
    fn protocol3_needs_second_mode() {
        let p = EnsembleParams::new(10, 10, 0, 10.0).unwrap();
        assert!(build_basis(ProtocolStep::P3StepB, &p).is_err());
    }

    #[test]
    fn general_zeno_dark_state() {
        let mut p = params(100, 0, 100.0);
        p.n_detector = 100;
        let d = dark_superradiant_decomposition(ProtocolStep::GeneralZeno(0), &p).unwrap();
        assert_eq!(d.dark.len(), 1);
        assert!((d.dark[0][0] - (100.0f64 / 101.0).sqrt()).abs() < 1e-12);
        assert!((d.dark[0][1] + (1.0f64 / 101.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn protocol3_dark_state_single_atom() {
        let p = params(1, 0, 10.0);
        let d = dark_superradiant_decomposition(ProtocolStep::P3StepB, &p).unwrap();
        let s = 1.0 / 3f64.sqrt();
        let dark = &d.dark[0];
        for (got, want) in dark.iter().zip([s, -s, s, 0.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn protocol2_has_no_zeno_structure() {
        let p = params(10, 0, 10.0);
        assert!(matches!(
            dark_superradiant_decomposition(ProtocolStep::P2StepE, &p),
            Err(Error::NoDissipativeStructure(_))
        ));
    }

    proptest! {
        #[test]
        fn dark_states_are_annihilated(n in 1u32..2000, m_frac in 0.0f64..0.9, nd in 1u32..500, k in 0u32..5) {
            let m = ((n as f64) * m_frac) as u32;
            let mut p = params(n.max(k + 1), m.min(n.max(k + 1) - 1), 50.0);
            p.n_detector = nd;
            for step in [ProtocolStep::P1StepC, ProtocolStep::P1StepE, ProtocolStep::P3StepB, ProtocolStep::GeneralZeno(k)] {
                let d = dark_superradiant_decomposition(step, &p).unwrap();
                for v in d.dark.iter().chain(&d.superradiant) {
                    prop_assert!((v.norm() - 1.0).abs() < 1e-12);
                }
                for dv in &d.dark {
                    for row in &d.lowering {
                        prop_assert!(row.dot(dv).abs() < 1e-12 * row.norm().max(1.0));
                    }
                    for sv in &d.superradiant {
                        prop_assert!(dv.dot(sv).abs() < 1e-12);
                    }
                }
            }
        }

        #[test]
        fn protocol3_initial_overlap(n in 1u32..5000) {
            let p = params(n, 0, 20.0);
            let d = dark_superradiant_decomposition(ProtocolStep::P3StepB, &p).unwrap();
            let nm = n as f64;
            prop_assert!((d.dark_overlap(0) - (nm / (nm + 2.0)).sqrt()).abs() < 1e-12);
            let scaled = &d.dark[0] * (nm + 2.0).sqrt();
            prop_assert!((scaled[0] - nm.sqrt()).abs() < 1e-9);
            prop_assert!((scaled[1] + 1.0).abs() < 1e-9);
            prop_assert!((scaled[2] - 1.0).abs() < 1e-9);
        }
    }
}
