//! Closed-loop simulation and the robustness experiments.

mod montecarlo;
mod plant;
mod sweep;
mod uncertainty;

pub use montecarlo::{monte_carlo, write_scenario_csv, ModeSummary, MonteCarloReport, ScenarioModel};
pub use plant::{
    integrate_hybrid, success_test, ControllerMode, CorrectionEvent, FailTag, LogRow, ScenarioSpec, SimConfig,
    SimResult, Verdict,
};
pub use sweep::{sweep_release_region, Axis, SweepCell, SweepGrid, SweepSpec};
pub use uncertainty::{sample_params, ParamSpread, SpreadKind, UncertaintyModel};
