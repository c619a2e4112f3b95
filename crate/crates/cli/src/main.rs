//! `trapeze`: plan, synthesize gains, simulate and stress-test release-and-catch
//! trajectories from one config file.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "trapeze", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration. Built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct Inputs {
    /// Trajectory JSON from `plan`. Re-planned from the config when omitted.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Gain schedule JSON from `gains`. Recomputed when omitted.
    #[arg(long)]
    gains: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the offline problem; writes plan.json and plan.svg.
    Plan {
        #[command(flatten)]
        common: Common,
    },
    /// Integrate the Riccati equation along a plan; writes gains.json.
    Gains {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// Simulate one scenario; writes the state log, a summary and a path plot.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        inputs: Inputs,
        /// Trajectory correction off (0) or on (1).
        #[arg(long, value_parser = ["0", "1"], default_value = "1")]
        tc: String,
        /// Feedforward only; overrides --tc.
        #[arg(long)]
        open_loop: bool,
        /// Draw plant, noise and jitter from the scenario model with this
        /// seed. Without it the plant is nominal and unperturbed.
        #[arg(long)]
        scenario: Option<u64>,
    },
    /// Paired-seed Monte Carlo over uncertain plants.
    Montecarlo {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        inputs: Inputs,
        /// Scenarios per controller, overriding the config.
        #[arg(long)]
        n: Option<usize>,
        /// Run only posture control with correction off (0) or on (1).
        #[arg(long, value_parser = ["0", "1"])]
        tc: Option<String>,
        /// Run only the feedforward controller.
        #[arg(long, conflicts_with = "tc")]
        open_loop: bool,
    },
    /// Landing regions over a grid of release perturbations.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        inputs: Inputs,
        /// `a_min:a_max:steps,ad_min:ad_max:steps`, overriding the config.
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
    },
    /// Print the default configuration as TOML.
    Config,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Infeasible(String),
    Diverged(String),
    Other(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            Self::Other(_) => 1,
            Self::Config(_) => 2,
            Self::Infeasible(_) => 3,
            Self::Diverged(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Config(m) => write!(f, "config error: {m}"),
            Self::Infeasible(m) => write!(f, "solver infeasible: {m}"),
            Self::Diverged(m) => write!(f, "simulation diverged: {m}"),
            Self::Other(m) => write!(f, "{m}"),
        }
    }
}

impl From<trapeze_core::Error> for CliError {
    fn from(e: trapeze_core::Error) -> Self {
        use trapeze_core::Error as E;
        match e {
            E::InvalidParams { .. } | E::EmptyApproachWindow { .. } => Self::Config(e.to_string()),
            E::SingularMassMatrix(_) | E::RiccatiBlowUp { .. } => Self::Infeasible(e.to_string()),
            other => Self::Other(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Other(e.to_string())
    }
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &common.out {
        cfg.out = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Plan { common } => commands::plan(&load(&common)?),
        Command::Gains { common, plan } => commands::gains(&load(&common)?, plan.as_deref()),
        Command::Simulate {
            common,
            inputs,
            tc,
            open_loop,
            scenario,
        } => {
            let mode = commands::mode(open_loop, Some(tc.as_str())).expect("one mode");
            commands::simulate(&load(&common)?, &inputs.into(), mode, scenario)
        }
        Command::Montecarlo {
            common,
            inputs,
            n,
            tc,
            open_loop,
        } => {
            let mut cfg = load(&common)?;
            if let Some(n) = n {
                cfg.runs = n;
            }
            cfg.validate()?;
            commands::montecarlo(&cfg, &inputs.into(), commands::mode(open_loop, tc.as_deref()))
        }
        Command::Sweep { common, inputs, grid } => {
            let mut cfg = load(&common)?;
            if let Some(g) = grid {
                cfg.sweep = trapeze_core::sim::SweepSpec::parse(&g).map_err(|e| CliError::Config(e.to_string()))?;
            }
            commands::sweep(&cfg, &inputs.into())
        }
        Command::Config => {
            print!("{}", RunConfig::default().to_toml());
            Ok(())
        }
    }
}

impl From<Inputs> for commands::InputFiles {
    fn from(i: Inputs) -> Self {
        Self {
            plan: i.plan,
            gains: i.gains,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("trapeze: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
