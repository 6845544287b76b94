//! One function per subcommand. Each builds its CSV in memory so nothing is
//! written when any point fails.

use std::fmt::Write as _;

use rayon::prelude::*;
use wgqed::dynamics::{fmt12, trajectory, uniform_grid};
use wgqed::merging::{repetition_recursion, optimize_beta, threshold_plan, MergePolicy, MergePlan, ThresholdVariant};
use wgqed::metrology::{
    best_point, claimed_delta_phi, phase_grid, quantum_fisher_information, sensitivity_scan, Generator, Observable,
    PhaseProbe, StateKind,
};
use wgqed::orchestrator::{records_csv, run_campaign, ProbabilitySource, Protocol, ProtocolSpec};
use wgqed::statespace::{EnsembleParams, ProtocolStep};
use wgqed::zeno::{
    analytic_operating_point, analytics_protocol1, analytics_protocol2, analytics_protocol3, exact_optimum,
    exact_p2_e_star, exact_p3_star, exact_p_c_star, protocol3_params, step_hamiltonian, zeno_populations_closed_form,
};

use crate::config::{DynamicsConfig, MetrologyConfig, PlanConfig, RunConfig, SweepConfig};
use crate::error::CliError;

type Result<T> = std::result::Result<T, CliError>;

fn parse_key<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| CliError::key(key, e))
}

/// Exact populations of every basis label and the no-jump norm, followed
/// by the Zeno-limit closed forms when the drive sits at its optimum.
pub fn cmd_dynamics(cfg: &DynamicsConfig) -> Result<String> {
    let step: ProtocolStep = parse_key("dynamics.step", &cfg.step)?;
    let mut params = EnsembleParams::new(cfg.n_target, cfg.n_detector, cfg.m, cfg.purcell)?.with_alpha(cfg.alpha)?;
    if let Some(r) = cfg.mode_ratio {
        params = params.with_mode_ratio(r)?;
    }
    if step == ProtocolStep::P3StepB {
        params = protocol3_params(&params)?;
    }
    let (omega_opt, t_opt) = analytic_operating_point(step, &params)?;
    let grid = match &cfg.times {
        Some(t) => t.clone(),
        None => uniform_grid(cfg.t_end.unwrap_or(1.5 * t_opt), cfg.points),
    };
    let h = step_hamiltonian(step, &params, cfg.omega.unwrap_or(omega_opt))?;
    let traj = trajectory(&h, &h.initial_state(), &grid)?;
    let analytic = cfg.omega.is_none() && step.has_zeno_structure();

    let mut out = String::from("t");
    for l in traj.labels() {
        let _ = write!(out, ",{l}");
    }
    out.push_str(",norm");
    if analytic {
        out.push_str(",analytic_dark,analytic_goal");
    }
    out.push('\n');
    let norms = traj.norms();
    for (i, &t) in traj.times().iter().enumerate() {
        out.push_str(&fmt12(t));
        for z in traj.amplitudes(i).iter() {
            let _ = write!(out, ",{}", fmt12(z.norm_sqr()));
        }
        let _ = write!(out, ",{}", fmt12(norms[i]));
        if analytic {
            let (d, g) = zeno_populations_closed_form(step, &params, t)?;
            let _ = write!(out, ",{},{}", fmt12(d), fmt12(g));
        }
        out.push('\n');
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SweepQuantity {
    PC,
    PE,
    PCStar,
    PEStar,
    PStep,
    PStar,
}

impl SweepQuantity {
    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "p_c" => Self::PC,
            "p_e" => Self::PE,
            "p_c_star" => Self::PCStar,
            "p_e_star" => Self::PEStar,
            "p_step" => Self::PStep,
            "p_star" => Self::PStar,
            _ => return Err(CliError::key("sweep.quantity", format!("unknown quantity `{s}`"))),
        })
    }

    fn is_probability(self) -> bool {
        matches!(self, Self::PC | Self::PE | Self::PStep)
    }

    /// `(exact, auxiliary, analytic)` at one parameter point.
    fn evaluate(self, p: &EnsembleParams) -> Result<(f64, f64, f64)> {
        Ok(match self {
            Self::PC => {
                let e = exact_optimum(ProtocolStep::P1StepC, p)?;
                (e.refined, e.at_analytic_time, analytics_protocol1(p)?.value("p_c"))
            }
            Self::PE => {
                let e = exact_optimum(ProtocolStep::P1StepE, p)?;
                (e.refined, e.at_analytic_time, analytics_protocol1(p)?.value("p_e"))
            }
            Self::PStep => {
                let e = exact_optimum(ProtocolStep::P3StepB, p)?;
                (e.refined, e.at_analytic_time, analytics_protocol3(&protocol3_params(p)?)?.value("p_step"))
            }
            Self::PCStar => {
                let j = exact_p_c_star(p)?;
                (j.total(), j.on_window, analytics_protocol1(p)?.value("p_c_star"))
            }
            Self::PStar => {
                let j = exact_p3_star(p)?;
                (j.total(), j.on_window, analytics_protocol3(&protocol3_params(p)?)?.value("p_star"))
            }
            Self::PEStar => {
                let x = exact_p2_e_star(p)?;
                (x, x, analytics_protocol2(p)?.value("p_e_star"))
            }
        })
    }
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Exact figure of merit against its closed form over a log-spaced Purcell
/// range, one block per N_m.
pub fn cmd_sweep(cfg: &SweepConfig) -> Result<String> {
    let q = SweepQuantity::parse(&cfg.quantity)?;
    let purcells = log_space(cfg.purcell_min, cfg.purcell_max, cfg.points);
    let points: Vec<(u32, f64)> = cfg.n_m.iter().flat_map(|&nm| purcells.iter().map(move |&p| (nm, p))).collect();
    let rows: Vec<String> = points
        .par_iter()
        .map(|&(nm, purcell)| {
            let n = nm + cfg.m;
            let p = EnsembleParams::new(n, cfg.n_detector.unwrap_or(n), cfg.m, purcell)?.with_alpha(cfg.alpha)?;
            let (exact, aux, analytic) = q.evaluate(&p)?;
            let dev = (exact - analytic) / analytic;
            Ok(format!("{nm},{},{},{},{},{}\n", fmt12(purcell), fmt12(exact), fmt12(aux), fmt12(analytic), fmt12(dev)))
        })
        .collect::<Result<_>>()?;
    let header = if q.is_probability() {
        "n_m,purcell,exact_optimum,exact_at_analytic_time,analytic,rel_deviation\n"
    } else {
        "n_m,purcell,exact_total,exact_window,analytic,rel_deviation\n"
    };
    Ok(std::iter::once(header.to_string()).chain(rows).collect())
}

fn parse_variant(name: &str, m: u64) -> Result<ThresholdVariant> {
    Ok(match name {
        "continuum" => ThresholdVariant::Continuum,
        "per_mode" => ThresholdVariant::PerMode,
        "exact_discrete" => ThresholdVariant::ExactDiscrete { m },
        "exact_per_mode" => ThresholdVariant::ExactPerMode { m },
        _ => return Err(CliError::key("plan.variant", format!("unknown variant `{name}`"))),
    })
}

fn variant_name(v: ThresholdVariant) -> &'static str {
    match v {
        ThresholdVariant::Continuum => "continuum",
        ThresholdVariant::PerMode => "per_mode",
        ThresholdVariant::ExactDiscrete { .. } => "exact_discrete",
        ThresholdVariant::ExactPerMode { .. } => "exact_per_mode",
    }
}

/// Merge plans for the zero-herald policy and each configured threshold,
/// then the optimal threshold of every variant.
pub fn cmd_plan(cfg: &PlanConfig) -> Result<String> {
    let variant = parse_variant(&cfg.variant, cfg.variant_m)?;
    let mut plans: Vec<(&str, MergePlan)> = vec![("", repetition_recursion(cfg.target_m, cfg.r1)?)];
    for &beta in &cfg.betas {
        plans.push((variant_name(variant), threshold_plan(cfg.target_m, beta, variant, cfg.r1)?));
    }
    let mut out = String::from("kind,variant,policy,level,excitations,q,cumulative_R,exponent\n");
    for (v, plan) in &plans {
        let exponent = plan.exponent.map(fmt12).unwrap_or_default();
        for l in &plan.step_log {
            let _ = writeln!(
                out,
                "plan,{v},{},{},{},{},{},{exponent}",
                plan.policy,
                l.level,
                fmt12(l.excitations),
                fmt12(l.success),
                fmt12(l.cumulative)
            );
        }
    }
    let variants = [
        ThresholdVariant::Continuum,
        ThresholdVariant::PerMode,
        ThresholdVariant::ExactDiscrete { m: cfg.variant_m },
        ThresholdVariant::ExactPerMode { m: cfg.variant_m },
    ];
    for v in variants {
        let o = optimize_beta(v)?;
        let _ = writeln!(out, "beta_opt,{},{},,,,,{}", variant_name(v), MergePolicy::NumberResolved(o.beta), fmt12(o.exponent));
    }
    Ok(out)
}

fn parse_kind(name: &str, size: usize) -> Result<StateKind> {
    if size == 0 {
        return Err(CliError::key("metrology.sizes", "sizes must be positive"));
    }
    Ok(match name {
        "noon" => StateKind::Noon(size),
        "holland_burnett" => StateKind::HollandBurnett(size),
        "yurke" => StateKind::Yurke(size),
        "dual_fock" => StateKind::DualFock(size),
        "single_mode" => StateKind::SingleMode(size),
        _ => return Err(CliError::key("metrology.kinds", format!("unknown state kind `{name}`"))),
    })
}

/// QFI bound, best error-propagation sensitivity over the phase window and
/// the quoted closed form for each probe.
pub fn cmd_metrology(cfg: &MetrologyConfig) -> Result<String> {
    let fixed: Option<Generator> = cfg.generator.as_deref().map(|g| parse_key("metrology.generator", g)).transpose()?;
    let mut probes = Vec::new();
    for name in &cfg.kinds {
        for &size in &cfg.sizes {
            let kind = parse_kind(name, size)?;
            let default =
                if matches!(kind, StateKind::Yurke(_)) { Generator::Interferometer } else { Generator::HalfDifference };
            probes.push((name.as_str(), size, kind, fixed.unwrap_or(default)));
        }
    }
    let phis = phase_grid(cfg.phi_half_width, cfg.phi_points);
    let rows: Vec<String> = probes
        .par_iter()
        .map(|(name, size, kind, generator)| {
            let probe = PhaseProbe::from_kind(kind, *generator)?;
            let f = quantum_fisher_information(&probe)?;
            let scan = sensitivity_scan(&probe, &Observable::ALL, &phis)?;
            let (best, phi, obs) = match best_point(&scan) {
                Some(b) => (fmt12(b.delta_phi), fmt12(b.phi), b.observable.to_string()),
                None => ("inf".into(), String::new(), String::new()),
            };
            let claimed = claimed_delta_phi(kind).map(fmt12).unwrap_or_default();
            Ok(format!(
                "{name},{size},{},{generator},{},{},{best},{phi},{obs},{claimed}\n",
                probe.n_total,
                fmt12(f.f_q),
                fmt12(f.delta_phi_min)
            ))
        })
        .collect::<Result<_>>()?;
    let header = "kind,size,n,generator,qfi,qfi_bound,best_delta_phi,best_phi,best_observable,claimed_delta_phi\n";
    Ok(std::iter::once(header.to_string()).chain(rows).collect())
}

/// Monte Carlo summary CSV and the per-seed record CSV.
pub fn cmd_run(cfg: &RunConfig) -> Result<(String, String)> {
    let protocol: Protocol = parse_key("run.protocol", &cfg.protocol)?;
    let mut params = EnsembleParams::new(cfg.n_target, cfg.n_detector, 0, cfg.purcell)?.with_alpha(cfg.alpha)?;
    if let Some(r) = cfg.mode_ratio {
        params = params.with_mode_ratio(r)?;
    }
    let mut spec = ProtocolSpec::new(protocol, params, cfg.target_m);
    spec.merge_policy = cfg.merge_policy.as_deref().map(|s| parse_key("run.merge_policy", s)).transpose()?;
    spec.source = match cfg.source.as_str() {
        "analytic" => ProbabilitySource::Analytic,
        "exact" => ProbabilitySource::Exact,
        s => return Err(CliError::key("run.source", format!("unknown source `{s}`"))),
    };
    spec.forced_success = cfg.forced_success;
    spec.validate()?;
    let end = cfg.seed.checked_add(cfg.runs).ok_or_else(|| CliError::key("run.seed", "seed range overflows"))?;
    let seeds: Vec<u64> = (cfg.seed..end).collect();
    let (records, s) = run_campaign(&spec, &seeds)?;
    let mut out = String::from(
        "protocol,target_m,merge_policy,runs,mean_attempts,sem_attempts,ci95_low,ci95_high,expected_repetitions,z,mean_infidelity,sem_infidelity,expected_infidelity\n",
    );
    let policy = spec.merge_policy.map(|p| p.to_string()).unwrap_or_else(|| "SEQUENTIAL".into());
    let _ = writeln!(
        out,
        "{protocol},{},{policy},{},{},{},{},{},{},{},{},{},{}",
        cfg.target_m,
        s.runs,
        fmt12(s.mean_attempts),
        fmt12(s.sem_attempts),
        fmt12(s.mean_attempts - 1.96 * s.sem_attempts),
        fmt12(s.mean_attempts + 1.96 * s.sem_attempts),
        fmt12(s.expected.repetitions),
        fmt12(s.attempts_z()),
        fmt12(s.mean_infidelity),
        fmt12(s.sem_infidelity),
        fmt12(s.expected.infidelity)
    );
    Ok((out, records_csv(&records)))
}
