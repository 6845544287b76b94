use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use wgqed_cli::commands::{cmd_dynamics, cmd_metrology, cmd_plan, cmd_run, cmd_sweep};
use wgqed_cli::{CliError, ExperimentConfig};

/// Waveguide-QED loading protocols: dynamics, figure sweeps, merge plans,
/// phase sensitivity and Monte Carlo campaigns, written as CSV.
#[derive(Debug, Parser)]
#[command(name = "wgqed", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML config file; defaults are used for missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output CSV; overrides the config `out` key. Standard output if neither is set.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// First Monte Carlo seed; overrides `run.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads; overrides the config `workers` key.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Exact and closed-form populations of one protocol step.
    Dynamics,
    /// Exact figure of merit vs its closed form over a Purcell range.
    Sweep,
    /// Merge-tree plans and optimal thresholds.
    Plan,
    /// Quantum Fisher information and error-propagation sensitivity.
    Metrology,
    /// Monte Carlo campaign against the expected cost.
    Run,
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    let result = match path {
        Some(p) => std::fs::write(p, text),
        None => std::io::stdout().write_all(text.as_bytes()),
    };
    result.map_err(|source| CliError::Io {
        path: path.map_or_else(|| "<stdout>".to_string(), |p| p.display().to_string()),
        source,
    })
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(w) = cli.workers {
        cfg.workers = Some(w);
    }
    if let Some(s) = cli.seed {
        cfg.run.seed = s;
    }
    if let Some(o) = cli.out {
        cfg.out = Some(o);
    }
    cfg.validate()?;
    if let Some(w) = cfg.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| CliError::key("workers", e))?;
    }
    log::info!("running {:?}", cli.command);
    let out = cfg.out.as_deref();
    match cli.command {
        Command::Dynamics => write_output(out, &cmd_dynamics(&cfg.dynamics)?),
        Command::Sweep => write_output(out, &cmd_sweep(&cfg.sweep)?),
        Command::Plan => write_output(out, &cmd_plan(&cfg.plan)?),
        Command::Metrology => write_output(out, &cmd_metrology(&cfg.metrology)?),
        Command::Run => {
            let (summary, records) = cmd_run(&cfg.run)?;
            if let Some(p) = &cfg.run.records {
                write_output(Some(p), &records)?;
            }
            write_output(out, &summary)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
