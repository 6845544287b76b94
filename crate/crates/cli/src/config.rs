//! Experiment configuration.
//!
//! The file is flat key-value text in TOML syntax with one optional section
//! per subcommand plus a few top-level keys. Every key has a default, so an
//! empty file (or no file) runs the reference configuration. Unknown keys are
//! rejected with their name.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Worker threads for sweeps and campaigns; all cores when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Output CSV path; standard output when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub dynamics: DynamicsConfig,
    pub sweep: SweepConfig,
    pub plan: PlanConfig,
    pub metrology: MetrologyConfig,
    pub run: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsConfig {
    /// `P1_stepC`, `P1_stepE`, `P2_stepE`, `P3_stepB` or `APPENDIX_ZENO(k)`.
    pub step: String,
    pub n_target: u32,
    pub n_detector: u32,
    pub m: u32,
    pub purcell: f64,
    pub alpha: f64,
    /// Γ_s/Γ_g for protocol 3; the balanced ratio when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode_ratio: Option<f64>,
    /// Drive in units of Γ*; the analytic optimum when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    /// End of the uniform grid; `1.5 T_opt` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    pub points: usize,
    /// Explicit time grid, overriding `t_end` and `points`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            step: "P1_stepC".into(),
            n_target: 100,
            n_detector: 100,
            m: 0,
            purcell: 100.0,
            alpha: 1.0,
            mode_ratio: None,
            omega: None,
            t_end: None,
            points: 201,
            times: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// `p_c`, `p_e`, `p_c_star`, `p_e_star`, `p_step` or `p_star`.
    pub quantity: String,
    /// Values of N_m = N - m.
    pub n_m: Vec<u32>,
    /// Detector size; equal to N when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_detector: Option<u32>,
    pub m: u32,
    pub alpha: f64,
    pub purcell_min: f64,
    pub purcell_max: f64,
    /// Log-spaced points between the two Purcell bounds.
    pub points: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            quantity: "p_c".into(),
            n_m: vec![100],
            n_detector: None,
            m: 0,
            alpha: 1.0,
            purcell_min: 10.0,
            purcell_max: 1e4,
            points: 13,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanConfig {
    pub target_m: u64,
    /// Expected attempts to load a single excitation.
    pub r1: f64,
    /// Thresholds of the number-resolved plans.
    pub betas: Vec<f64>,
    /// `continuum`, `per_mode`, `exact_discrete` or `exact_per_mode`.
    pub variant: String,
    /// Photon number at which the exact variants are evaluated.
    pub variant_m: u64,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self { target_m: 16, r1: 1.0, betas: vec![0.238], variant: "per_mode".into(), variant_m: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetrologyConfig {
    /// `noon`, `holland_burnett`, `yurke`, `dual_fock` or `single_mode`.
    pub kinds: Vec<String>,
    /// Photon number of NOON and single-mode probes; photons per mode of
    /// the others.
    pub sizes: Vec<usize>,
    /// Phase generator; `INTERFEROMETER` for Yurke and `HALF_DIFFERENCE`
    /// for the rest when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    pub phi_half_width: f64,
    pub phi_points: usize,
}

impl Default for MetrologyConfig {
    fn default() -> Self {
        Self {
            kinds: vec!["noon".into(), "holland_burnett".into(), "yurke".into()],
            sizes: vec![2, 4, 8, 16],
            generator: None,
            phi_half_width: 0.3,
            phi_points: 61,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// `P1`, `P2` or `P3`.
    pub protocol: String,
    pub n_target: u32,
    pub n_detector: u32,
    pub purcell: f64,
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode_ratio: Option<f64>,
    pub target_m: u32,
    /// `ZERO_HERALD` or `NUMBER_RESOLVED(β)`; sequential loading when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub merge_policy: Option<String>,
    /// `analytic` or `exact` step probabilities.
    pub source: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub forced_success: Option<f64>,
    /// First seed; runs use `seed .. seed + runs`.
    pub seed: u64,
    pub runs: u64,
    /// Per-seed record CSV, written next to the summary when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub records: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            protocol: "P1".into(),
            n_target: 100,
            n_detector: 100,
            purcell: 100.0,
            alpha: 1.0,
            mode_ratio: None,
            target_m: 3,
            merge_policy: None,
            source: "analytic".into(),
            forced_success: None,
            seed: 0,
            runs: 10_000,
            records: None,
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Section-independent checks; each subcommand validates its own
    /// section further when it builds the domain records.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.workers == Some(0) {
            return Err(CliError::key("workers", "must be positive"));
        }
        let d = &self.dynamics;
        positive("dynamics.purcell", d.purcell)?;
        positive("dynamics.alpha", d.alpha)?;
        if let Some(t) = d.t_end {
            positive("dynamics.t_end", t)?;
        }
        if let Some(times) = &d.times {
            if times.is_empty() {
                return Err(CliError::key("dynamics.times", "time grid is empty"));
            }
        } else if d.points < 2 {
            return Err(CliError::key("dynamics.points", "time grid needs at least two points"));
        }
        let s = &self.sweep;
        if s.n_m.is_empty() {
            return Err(CliError::key("sweep.n_m", "range is empty"));
        }
        if s.points == 0 {
            return Err(CliError::key("sweep.points", "range is empty"));
        }
        positive("sweep.purcell_min", s.purcell_min)?;
        positive("sweep.alpha", s.alpha)?;
        if s.purcell_max < s.purcell_min {
            return Err(CliError::key("sweep.purcell_max", "below purcell_min"));
        }
        positive("plan.r1", self.plan.r1)?;
        let m = &self.metrology;
        if m.kinds.is_empty() || m.sizes.is_empty() {
            return Err(CliError::key("metrology.kinds", "kinds and sizes must be non-empty"));
        }
        positive("metrology.phi_half_width", m.phi_half_width)?;
        let r = &self.run;
        positive("run.purcell", r.purcell)?;
        positive("run.alpha", r.alpha)?;
        if r.runs == 0 {
            return Err(CliError::key("run.runs", "campaign needs at least one run"));
        }
        Ok(())
    }
}

fn positive(key: &'static str, x: f64) -> Result<(), CliError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(CliError::key(key, format!("{x} is not positive")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn empty_file_is_default() {
        assert_eq!(ExperimentConfig::parse("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn unknown_key_is_named() {
        let err = ExperimentConfig::parse("[sweep]\nquantiy = \"p_c\"\n").unwrap_err();
        assert!(err.to_string().contains("quantiy"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn empty_time_grid_rejected() {
        let err = ExperimentConfig::parse("[dynamics]\ntimes = []\n").unwrap_err();
        assert!(err.to_string().contains("dynamics.times"));
    }
}
