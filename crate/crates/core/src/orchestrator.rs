//! Full protocol runs built from single heralded steps.
//!
//! * Protocol 1 loads excitations one at a time and restarts from the empty
//!   ensemble after any failed herald.
//! * Protocols 2 and 3 repump after a failed herald and retry the same
//!   step; each completed failed attempt adds the per-attempt error `ε` to
//!   the accumulated infidelity.
//! * With a zero-herald merge policy, protocols 2 and 3 instead load single
//!   excitations into fresh ensembles and combine them along a binary tree.
//!
//! Runs are driven by a ChaCha8 stream seeded from the run's `u64` seed, so
//! a `(spec, seed)` pair always produces the same record.

use std::fmt;
use std::fmt::Write as _;
use std::marker::PhantomData;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dynamics::fmt12;
use crate::error::{invalid, Error, Result};
use crate::merging::{doubling_probability, repetition_recursion, threshold_plan, MergePolicy, ThresholdVariant, TwoModeState};
use crate::statespace::{EnsembleParams, ProtocolStep};
use crate::zeno::{
    analytics_protocol1, analytics_protocol2, analytics_protocol3, exact_optimum, goal_population,
    hamiltonian_protocol2_step_e, protocol3_params,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Protocol {
    P1,
    P2,
    P3,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::P1 => "P1",
            Protocol::P2 => "P2",
            Protocol::P3 => "P3",
        })
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "P1" | "1" => Ok(Protocol::P1),
            "P2" | "2" => Ok(Protocol::P2),
            "P3" | "3" => Ok(Protocol::P3),
            _ => Err(invalid("protocol", format!("unknown protocol `{s}`"))),
        }
    }
}

/// Where step success probabilities come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbabilitySource {
    Analytic,
    /// Restricted-basis propagation at the analytic operating point.
    Exact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolSpec {
    pub protocol: Protocol,
    pub params: EnsembleParams,
    pub target_m: u32,
    /// Merge policy for protocols 2 and 3; `None` loads sequentially.
    pub merge_policy: Option<MergePolicy>,
    pub two_mode: Option<(C64, C64)>,
    pub source: ProbabilitySource,
    /// Overrides every step success probability.
    pub forced_success: Option<f64>,
}

impl ProtocolSpec {
    pub fn new(protocol: Protocol, params: EnsembleParams, target_m: u32) -> Self {
        Self {
            protocol,
            params,
            target_m,
            merge_policy: None,
            two_mode: None,
            source: ProbabilitySource::Analytic,
            forced_success: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.target_m == 0 {
            return Err(invalid("target_m", "must be positive"));
        }
        if self.target_m >= self.params.n_target {
            return Err(invalid("target_m", format!("{} must be below n_target = {}", self.target_m, self.params.n_target)));
        }
        if let Some(p) = self.forced_success {
            if !(p > 0.0 && p <= 1.0) {
                return Err(invalid("forced_success", format!("{p} is outside (0, 1]")));
            }
        }
        if let Some((a, b)) = self.two_mode {
            let n = a.norm_sqr() + b.norm_sqr();
            if (n - 1.0).abs() > 1e-12 {
                return Err(Error::NotNormalized(n));
            }
        }
        match (self.protocol, self.merge_policy) {
            (Protocol::P1, Some(_)) => Err(invalid("merge_policy", "protocol 1 restarts and does not merge")),
            (_, Some(MergePolicy::ZeroHerald)) if !self.target_m.is_power_of_two() => {
                Err(Error::NotPowerOfTwo(self.target_m as u64))
            }
            _ => Ok(()),
        }
    }

    fn params_at(&self, stored: u32) -> Result<EnsembleParams> {
        let p = EnsembleParams { m: stored, ..self.params };
        p.validate()?;
        Ok(p)
    }
}

/// Success probability and error bookkeeping of one heralded step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepModel {
    /// Excitations stored before the step.
    pub stored: u32,
    pub success: f64,
    /// Infidelity added by a heralded success.
    pub error_on_success: f64,
    /// Infidelity added by a completed failed attempt (repumped protocols).
    pub error_on_failure: f64,
}

/// Per-level step models for levels `0..target_m`.
pub fn step_models(spec: &ProtocolSpec) -> Result<Vec<StepModel>> {
    spec.validate()?;
    let final_params = spec.params_at(spec.target_m)?;
    let levels = match (spec.protocol, spec.merge_policy) {
        (Protocol::P1, _) | (_, None) => spec.target_m,
        _ => 1,
    };
    (0..levels)
        .map(|i| {
            let p = spec.params_at(i)?;
            let (success, on_success, on_failure) = match spec.protocol {
                Protocol::P1 => {
                    let success = match spec.source {
                        ProbabilitySource::Analytic => analytics_protocol1(&p)?.value("p_step"),
                        ProbabilitySource::Exact => {
                            exact_optimum(ProtocolStep::P1StepC, &p)?.at_analytic_time
                                * exact_optimum(ProtocolStep::P1StepE, &p)?.at_analytic_time
                        }
                    };
                    (success, analytics_protocol1(&final_params)?.value("p_c_star"), 0.0)
                }
                Protocol::P2 => {
                    let r = analytics_protocol2(&p)?;
                    let success = match spec.source {
                        ProbabilitySource::Analytic => r.value("q_step"),
                        ProbabilitySource::Exact => {
                            let h = hamiltonian_protocol2_step_e(&p)?;
                            exact_optimum(ProtocolStep::P1StepC, &p)?.at_analytic_time * goal_population(&h, 1.0 / p.gamma_1d)?
                        }
                    };
                    (success, r.value("p_c_star"), r.value("epsilon_star"))
                }
                Protocol::P3 => {
                    let p = protocol3_params(&p)?;
                    let r = analytics_protocol3(&p)?;
                    let success = match spec.source {
                        ProbabilitySource::Analytic => r.value("p_step"),
                        ProbabilitySource::Exact => exact_optimum(ProtocolStep::P3StepB, &p)?.at_analytic_time,
                    };
                    let nm = p.n_m() as f64;
                    let eps = (r.value("p_star") + r.value("p_pump_star")) * i as f64 / nm;
                    (success, 0.0, eps)
                }
            };
            Ok(StepModel {
                stored: i,
                success: spec.forced_success.unwrap_or(success),
                error_on_success: on_success,
                error_on_failure: on_failure,
            })
        })
        .collect()
}

/// `Σ_j ∏_{i=j}^{m-1} 1/p_i`: expected attempts when any failure restarts
/// from level 0.
pub fn restart_expectation(probabilities: &[f64]) -> f64 {
    let mut total = 0.0;
    let mut prod = 1.0;
    for &p in probabilities.iter().rev() {
        prod /= p;
        total += prod;
    }
    total
}

/// Analytic expected cost and infidelity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedCost {
    pub repetitions: f64,
    pub infidelity: f64,
}

pub fn expected_cost(spec: &ProtocolSpec) -> Result<ExpectedCost> {
    let models = step_models(spec)?;
    let m = spec.target_m as u64;
    let cost = match (spec.protocol, spec.merge_policy) {
        (Protocol::P1, _) => {
            let ps: Vec<f64> = models.iter().map(|s| s.success).collect();
            ExpectedCost {
                repetitions: restart_expectation(&ps),
                infidelity: models.iter().map(|s| s.error_on_success).sum(),
            }
        }
        (_, None) => ExpectedCost {
            repetitions: models.iter().map(|s| 1.0 / s.success).sum(),
            infidelity: models.iter().map(|s| s.error_on_success + s.error_on_failure * (1.0 / s.success - 1.0)).sum(),
        },
        (_, Some(policy)) => {
            let leaf = models[0];
            let r1 = 1.0 / leaf.success;
            let repetitions = match policy {
                MergePolicy::ZeroHerald => repetition_recursion(m, r1)?.expected_repetitions,
                MergePolicy::NumberResolved(beta) => threshold_plan(m.max(2), beta, ThresholdVariant::PerMode, r1)?.expected_repetitions,
            };
            ExpectedCost { repetitions, infidelity: m as f64 * leaf.error_on_success }
        }
    };
    Ok(ExpectedCost { infidelity: cost.infidelity.min(1.0), ..cost })
}

/// What happened at one heralded operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    /// Single-excitation load at the given stored level.
    Load { stored: u32, success: bool },
    /// Merge of two ensembles holding `k` excitations each.
    Merge { k: u32, success: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    pub attempts: u64,
    pub heralds: u64,
    pub restarts: u64,
    pub accumulated_infidelity: f64,
    pub trace: Vec<Outcome>,
}

impl RunRecord {
    fn new(seed: u64) -> Self {
        Self { seed, attempts: 0, heralds: 0, restarts: 0, accumulated_infidelity: 0.0, trace: Vec::new() }
    }

    fn record(&mut self, outcome: Outcome, success: bool) {
        self.attempts += 1;
        if success {
            self.heralds += 1;
        } else {
            self.restarts += 1;
        }
        self.trace.push(outcome);
    }
}

/// Longest trace kept per run; longer runs keep counting without tracing.
pub const MAX_TRACE: usize = 100_000;

pub fn run_protocol(spec: &ProtocolSpec, seed: u64) -> Result<RunRecord> {
    let models = step_models(spec)?;
    run_with_models(spec, &models, seed)
}

fn bernoulli(rng: &mut ChaCha8Rng, p: f64) -> bool {
    rng.random::<f64>() < p
}

fn run_with_models(spec: &ProtocolSpec, models: &[StepModel], seed: u64) -> Result<RunRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rec = RunRecord::new(seed);
    match (spec.protocol, spec.merge_policy) {
        (Protocol::P1, _) => {
            let mut level = 0usize;
            let mut infidelity = 0.0;
            while level < models.len() {
                let s = models[level];
                let ok = bernoulli(&mut rng, s.success);
                push(&mut rec, Outcome::Load { stored: s.stored, success: ok }, ok);
                if ok {
                    infidelity += s.error_on_success;
                    level += 1;
                } else {
                    level = 0;
                    infidelity = 0.0;
                }
            }
            rec.accumulated_infidelity = infidelity.min(1.0);
        }
        (_, None) => {
            let mut infidelity: f64 = 0.0;
            for s in models {
                loop {
                    let ok = bernoulli(&mut rng, s.success);
                    push(&mut rec, Outcome::Load { stored: s.stored, success: ok }, ok);
                    if ok {
                        infidelity += s.error_on_success;
                        break;
                    }
                    infidelity += s.error_on_failure;
                }
            }
            rec.accumulated_infidelity = infidelity.min(1.0);
        }
        (_, Some(MergePolicy::ZeroHerald)) => {
            let infidelity = build_tree(spec.target_m, models[0], &mut rng, &mut rec);
            rec.accumulated_infidelity = infidelity.min(1.0);
        }
        (_, Some(MergePolicy::NumberResolved(_))) => {
            return Err(invalid("merge_policy", "Monte Carlo runs support the zero-herald tree only"));
        }
    }
    Ok(rec)
}

fn push(rec: &mut RunRecord, outcome: Outcome, ok: bool) {
    if rec.trace.len() >= MAX_TRACE {
        rec.attempts += 1;
        if ok {
            rec.heralds += 1;
        } else {
            rec.restarts += 1;
        }
        return;
    }
    rec.record(outcome, ok);
}

/// Builds an ensemble with `m` excitations; returns its infidelity.
fn build_tree(m: u32, leaf: StepModel, rng: &mut ChaCha8Rng, rec: &mut RunRecord) -> f64 {
    if m == 1 {
        loop {
            let ok = bernoulli(rng, leaf.success);
            push(rec, Outcome::Load { stored: 0, success: ok }, ok);
            if ok {
                return leaf.error_on_success;
            }
        }
    }
    let k = m / 2;
    let q = doubling_probability(k as u64);
    loop {
        let a = build_tree(k, leaf, rng, rec);
        let b = build_tree(k, leaf, rng, rec);
        let ok = bernoulli(rng, q);
        push(rec, Outcome::Merge { k, success: ok }, ok);
        if ok {
            return a + b;
        }
    }
}

/// Mean and standard error of a campaign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CampaignSummary {
    pub runs: usize,
    pub mean_attempts: f64,
    pub sem_attempts: f64,
    pub mean_infidelity: f64,
    pub sem_infidelity: f64,
    pub expected: ExpectedCost,
}

impl CampaignSummary {
    /// `|mean - expected| / sem` for the attempt count.
    pub fn attempts_z(&self) -> f64 {
        if self.sem_attempts == 0.0 {
            return if self.mean_attempts == self.expected.repetitions { 0.0 } else { f64::INFINITY };
        }
        (self.mean_attempts - self.expected.repetitions).abs() / self.sem_attempts
    }
}

fn mean_sem(xs: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let mean = xs.clone().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Runs one record per seed in parallel; records come back in seed order.
pub fn run_campaign(spec: &ProtocolSpec, seeds: &[u64]) -> Result<(Vec<RunRecord>, CampaignSummary)> {
    if seeds.is_empty() {
        return Err(invalid("seeds", "campaign needs at least one seed"));
    }
    let models = step_models(spec)?;
    let records: Vec<RunRecord> = seeds
        .par_iter()
        .map(|&s| {
            let mut r = run_with_models(spec, &models, s)?;
            r.trace = Vec::new();
            Ok(r)
        })
        .collect::<Result<_>>()?;
    let n = records.len();
    let (mean_attempts, sem_attempts) = mean_sem(records.iter().map(|r| r.attempts as f64), n);
    let (mean_infidelity, sem_infidelity) = mean_sem(records.iter().map(|r| r.accumulated_infidelity), n);
    let summary = CampaignSummary { runs: n, mean_attempts, sem_attempts, mean_infidelity, sem_infidelity, expected: expected_cost(spec)? };
    Ok((records, summary))
}

/// CSV `seed,attempts,heralds,restarts,infidelity`.
pub fn records_csv(records: &[RunRecord]) -> String {
    let mut out = String::from("seed,attempts,heralds,restarts,infidelity\n");
    for r in records {
        let _ = writeln!(out, "{},{},{},{},{}", r.seed, r.attempts, r.heralds, r.restarts, fmt12(r.accumulated_infidelity));
    }
    out
}

// ---------------------------------------------------------------------------
// Repumping

#[derive(Debug, Clone, PartialEq)]
pub struct RepumpOutcome {
    pub stored: u32,
    /// Operations applied, in order.
    pub sequence: Vec<&'static str>,
    /// Free-space emission probability of the pump itself.
    pub p_pump: f64,
    /// Overlap factor with the surviving stored excitations.
    pub survivor_factor: f64,
    /// Error charged to the stored excitations.
    pub error: f64,
}

/// Resets the target ensemble after a failed herald, keeping `stored`
/// excitations. Convention constant 1 in every proportionality.
pub fn repump(params: &EnsembleParams, stored: u32, protocol: Protocol) -> Result<RepumpOutcome> {
    params.validate()?;
    if stored == 0 {
        return Ok(RepumpOutcome { stored, sequence: Vec::new(), p_pump: 0.0, survivor_factor: 0.0, error: 0.0 });
    }
    let p = params.normalized();
    let pp = p.purcell();
    let n = p.n_target as f64;
    let nm = (p.n_target - stored) as f64;
    let (sequence, p_pump) = match protocol {
        Protocol::P2 => (
            vec!["pi pulse c->e1 with collective decay", "transfer s->c", "pi pulse c->e1 with collective decay"],
            1.0 / (nm * pp),
        ),
        Protocol::P3 => (vec!["collective pump s->e->g"], 1.0 / (n * pp)),
        Protocol::P1 => return Err(invalid("protocol", "protocol 1 restarts instead of repumping")),
    };
    let survivor_factor = stored as f64 / n;
    Ok(RepumpOutcome { stored, sequence, p_pump, survivor_factor, error: p_pump * survivor_factor })
}

// ---------------------------------------------------------------------------
// Two-mode heralded addition

/// Source atom levels: the two loaded branches and the emptied ground state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Source {
    Up,
    Down,
    Ground,
}

/// Detector register: empty or holding the herald of one branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Detector {
    Empty,
    Up,
    Down,
}

/// Stage markers; measurement exists only after the final beamsplitter.
pub mod stage {
    #[derive(Debug)]
    pub struct Prepared;
    #[derive(Debug)]
    pub struct AfterCUp;
    #[derive(Debug)]
    pub struct AfterO1;
    #[derive(Debug)]
    pub struct AfterCDown;
    #[derive(Debug)]
    pub struct AfterO2;
}

/// Composite source ⊗ bosons ⊗ detector register as a sparse sum.
#[derive(Debug)]
pub struct Register<S> {
    terms: Vec<(Source, Detector, C64, TwoModeState)>,
    _stage: PhantomData<S>,
}

impl<S> Register<S> {
    fn next<T>(terms: Vec<(Source, Detector, C64, TwoModeState)>) -> Register<T> {
        Register { terms, _stage: PhantomData }
    }

    /// `Ĉ_σ`: the source branch `σ` deposits its excitation into boson mode
    /// `σ` and leaves its herald in the detector.
    fn controlled_load(self, sigma: Source) -> Vec<(Source, Detector, C64, TwoModeState)> {
        self.terms
            .into_iter()
            .map(|(src, det, amp, psi)| {
                if src != sigma || det != Detector::Empty {
                    return (src, det, amp, psi);
                }
                let (cu, cd, herald) = match sigma {
                    Source::Up => (C64::new(1.0, 0.0), C64::new(0.0, 0.0), Detector::Up),
                    _ => (C64::new(0.0, 0.0), C64::new(1.0, 0.0), Detector::Down),
                };
                (Source::Ground, herald, amp, psi.create(cu, cd))
            })
            .collect()
    }
}

impl Register<stage::Prepared> {
    pub fn new(alpha_up: C64, alpha_down: C64, state: &TwoModeState) -> Result<Self> {
        let n = alpha_up.norm_sqr() + alpha_down.norm_sqr();
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized(n));
        }
        Ok(Self {
            terms: vec![
                (Source::Up, Detector::Empty, alpha_up, state.clone()),
                (Source::Down, Detector::Empty, alpha_down, state.clone()),
            ],
            _stage: PhantomData,
        })
    }

    pub fn c_up(self) -> Register<stage::AfterCUp> {
        let t = self.controlled_load(Source::Up);
        Register::<stage::Prepared>::next(t)
    }
}

impl Register<stage::AfterCUp> {
    /// `Ô1`: readies the down branch of the source; no effect on amplitudes.
    pub fn o1(self) -> Register<stage::AfterO1> {
        Register::<stage::AfterCUp>::next(self.terms)
    }
}

impl Register<stage::AfterO1> {
    pub fn c_down(self) -> Register<stage::AfterCDown> {
        let t = self.controlled_load(Source::Down);
        Register::<stage::AfterO1>::next(t)
    }
}

impl Register<stage::AfterCDown> {
    /// `Ô2`: 50:50 on the detector heralds, `Up → (Up + Down)/√2`,
    /// `Down → (Up - Down)/√2`.
    pub fn o2(self) -> Register<stage::AfterO2> {
        let s = 0.5f64.sqrt();
        let mut out = Vec::with_capacity(self.terms.len() * 2);
        for (src, det, amp, psi) in self.terms {
            match det {
                Detector::Up => {
                    out.push((src, Detector::Up, amp * s, psi.clone()));
                    out.push((src, Detector::Down, amp * s, psi));
                }
                Detector::Down => {
                    out.push((src, Detector::Up, amp * s, psi.clone()));
                    out.push((src, Detector::Down, -amp * s, psi));
                }
                Detector::Empty => out.push((src, det, amp, psi)),
            }
        }
        Register::<stage::AfterCDown>::next(out)
    }
}

/// One heralded branch: the unnormalized boson state and its probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub state: TwoModeState,
    pub probability: f64,
}

impl Branch {
    pub fn normalized(&self) -> Result<TwoModeState> {
        self.state.normalized()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeraldedOutcomes {
    pub up: Branch,
    pub down: Branch,
}

impl HeraldedOutcomes {
    pub fn total_probability(&self) -> f64 {
        self.up.probability + self.down.probability
    }
}

impl Register<stage::AfterO2> {
    pub fn measure(self) -> Result<HeraldedOutcomes> {
        let cutoff = self.terms.iter().map(|t| t.3.cutoff()).max().unwrap_or(0);
        let mut up = TwoModeState::vacuum(cutoff).map_diagonal(|_, _| C64::new(0.0, 0.0));
        let mut down = up.clone();
        for (_, det, amp, psi) in self.terms {
            let psi = psi.with_cutoff(cutoff)?;
            let add = |acc: &TwoModeState| -> Result<TwoModeState> {
                let terms: Vec<_> = acc.terms().chain(psi.terms().map(|(u, d, a)| (u, d, a * amp))).collect();
                TwoModeState::from_terms(cutoff, &terms)
            };
            match det {
                Detector::Up => up = add(&up)?,
                Detector::Down => down = add(&down)?,
                Detector::Empty => {}
            }
        }
        let (pu, pd) = (up.norm_sqr(), down.norm_sqr());
        Ok(HeraldedOutcomes { up: Branch { state: up, probability: pu }, down: Branch { state: down, probability: pd } })
    }
}

/// `Ĉ↑ → Ô1 → Ĉ↓ → Ô2 → measure` on `(α↑, α↓) ⊗ |ψ⟩`.
pub fn two_mode_add(alpha_up: C64, alpha_down: C64, state: &TwoModeState) -> Result<HeraldedOutcomes> {
    Register::new(alpha_up, alpha_down, state)?.c_up().o1().c_down().o2().measure()
}

/// Adds `phases.len()` excitations with `α↑ = 1/√2`, `α↓ = e^{iφ_j}/√2`,
/// keeping the up-herald branch each time.
pub fn iterate_two_mode_add(phases: &[f64]) -> Result<TwoModeState> {
    let s = 0.5f64.sqrt();
    let mut psi = TwoModeState::vacuum(0);
    for &p in phases {
        psi = two_mode_add(C64::new(s, 0.0), C64::from_polar(s, p), &psi)?.up.normalized()?;
    }
    Ok(psi)
}
