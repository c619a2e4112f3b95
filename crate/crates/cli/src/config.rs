//! Run configuration file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use trapeze_core::control::{CorrectionPolicy, RiccatiConfig};
use trapeze_core::dynamics::{RobotParams, State, TargetSpec};
use trapeze_core::planner::{KnotGrid, SolverConfig};
use trapeze_core::sim::{ParamSpread, ScenarioModel, SimConfig, SpreadKind, SweepSpec, UncertaintyModel};

use crate::CliError;

/// Uncertainty and scenario noise; the nominal plant is the `robot` section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub spread: ParamSpread,
    pub kind: SpreadKind,
    /// Cut-off in spreads.
    pub truncation: f64,
    /// Largest initial joint-angle offset (rad).
    pub initial_noise: f64,
    /// Largest release-time offset (s).
    pub release_jitter: f64,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        let m = ScenarioModel::default();
        Self {
            spread: m.uncertainty.spread,
            kind: m.uncertainty.kind,
            truncation: m.uncertainty.truncation,
            initial_noise: m.initial_noise,
            release_jitter: m.release_jitter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Directory for every artifact.
    pub out: PathBuf,
    pub seed: u64,
    /// Monte Carlo scenarios per controller.
    pub runs: usize,
    /// `(alpha, beta, alpha_dot, beta_dot)` at the start of the swing.
    /// Defaults to hanging still with the body horizontal.
    pub initial_state: Option<[f64; 4]>,
    pub robot: RobotParams,
    pub target: TargetSpec,
    pub grid: KnotGrid,
    pub solver: SolverConfig,
    pub riccati: RiccatiConfig,
    pub correction: CorrectionPolicy,
    pub sim: SimConfig,
    pub scenario: ScenarioSection,
    pub sweep: SweepSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            out: PathBuf::from("out"),
            seed: 1,
            runs: 300,
            initial_state: None,
            robot: RobotParams::default(),
            target: TargetSpec::default(),
            grid: KnotGrid::default(),
            solver: SolverConfig::default(),
            riccati: RiccatiConfig::default(),
            // reproducible artifacts need the iteration budget, not the clock
            correction: CorrectionPolicy {
                enforce_budget: false,
                ..CorrectionPolicy::default()
            },
            sim: SimConfig::default(),
            scenario: ScenarioSection::default(),
            sweep: SweepSpec::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let cfg = |e: trapeze_core::Error| CliError::Config(e.to_string());
        self.robot.validate().map_err(cfg)?;
        self.target.validate().map_err(cfg)?;
        self.grid.validate().map_err(cfg)?;
        self.solver.validate().map_err(cfg)?;
        self.riccati.validate().map_err(cfg)?;
        self.correction.validate().map_err(cfg)?;
        self.sim.validate().map_err(cfg)?;
        self.scenario_model().validate().map_err(cfg)?;
        self.sweep.validate().map_err(cfg)?;
        if self.runs == 0 {
            return Err(CliError::Config("runs: must be positive".into()));
        }
        Ok(())
    }

    pub fn x0(&self) -> State {
        match self.initial_state {
            Some(x) => State::from(x),
            None => State::new(-self.robot.kappa1, self.robot.kappa1, 0.0, 0.0),
        }
    }

    pub fn scenario_model(&self) -> ScenarioModel {
        let s = &self.scenario;
        ScenarioModel {
            uncertainty: UncertaintyModel {
                nominal: self.robot,
                spread: s.spread,
                kind: s.kind,
                truncation: s.truncation,
            },
            initial_noise: s.initial_noise,
            release_jitter: s.release_jitter,
        }
    }
}
