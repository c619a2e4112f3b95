//! Feedback control and in-flight trajectory correction.

mod correction;
mod estimator;
mod law;
mod riccati;

pub use correction::{
    correct_trajectory, spawn_correction, CorrectionContext, CorrectionOutcome, CorrectionPolicy, Plan, PlanHandle,
};
pub use estimator::{estimate_release, EstimatorWindow, HipSample, RANK_TOLERANCE};
pub use law::{open_loop_control, tvlqr_control, ControlOutput};
pub use riccati::{
    integrate_backward, riccati_backward, riccati_solve, GainSchedule, Interval, RiccatiConfig, RiccatiHealth,
    RiccatiSolution, GAIN_FORMAT,
};
