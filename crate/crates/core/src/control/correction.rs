//! Mid-flight trajectory correction and the shared plan handle.

use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Instant;

use arc_swap::ArcSwap;
use serde::{Deserialize, Serialize};

use crate::dynamics::{ReleaseState, RobotParams, TargetSpec};
use crate::error::{Error, Result};
use crate::planner::{plan_flight, CancelToken, OnlinePlanRequest, SolveStatus, SolverConfig, TrajectorySpline};

use super::{riccati_backward, GainSchedule, RiccatiConfig};

/// Reference trajectory together with its feedback gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub trajectory: TrajectorySpline,
    pub gains: GainSchedule,
}

impl Plan {
    pub fn new(trajectory: TrajectorySpline, gains: GainSchedule) -> Result<Self> {
        if gains.attempt != trajectory.metadata.attempt {
            return Err(Error::MalformedTrajectory(
                "gains and trajectory come from different attempts".into(),
            ));
        }
        Ok(Self { trajectory, gains })
    }

    pub fn attempt(&self) -> u32 {
        self.trajectory.metadata.attempt
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            trajectory: serde_json::Value,
            gains: serde_json::Value,
        }
        let raw: Raw = serde_json::from_str(s).map_err(|e| Error::MalformedTrajectory(e.to_string()))?;
        let trajectory = TrajectorySpline::from_json(&raw.trajectory.to_string())?;
        let gains = GainSchedule::from_json(&raw.gains.to_string())?;
        Self::new(trajectory, gains)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorrectionPolicy {
    /// COM release position deviation that triggers a re-plan (m).
    pub position_threshold: f64,
    /// COM release velocity deviation that triggers a re-plan (m/s).
    pub velocity_threshold: f64,
    /// Wall-clock budget per attempt (s).
    pub budget: f64,
    pub max_attempts: u32,
    /// Segments in the flight-only program.
    pub n_flight: usize,
    /// Stop the solver at the wall-clock budget. Disable for reproducible runs.
    pub enforce_budget: bool,
    /// Deterministic stand-in for the budget: total inner solver iterations.
    pub work_budget: Option<usize>,
}

impl Default for CorrectionPolicy {
    fn default() -> Self {
        Self {
            position_threshold: 0.005,
            velocity_threshold: 0.02,
            budget: 0.5,
            max_attempts: 2,
            n_flight: 25,
            enforce_budget: true,
            work_budget: Some(1200),
        }
    }
}

impl CorrectionPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.budget > 0.0) {
            return Err(Error::invalid("correction.budget", "must be positive"));
        }
        if !(self.position_threshold >= 0.0 && self.velocity_threshold >= 0.0) {
            return Err(Error::invalid("correction", "thresholds must be non-negative"));
        }
        if self.work_budget == Some(0) {
            return Err(Error::invalid("correction.work_budget", "must be positive"));
        }
        if self.n_flight < 4 {
            return Err(Error::invalid("correction.n_flight", "at least 4 segments"));
        }
        Ok(())
    }

    /// Whether `estimate` is far enough from `reference` to warrant a re-plan.
    pub fn deviates(&self, estimate: &ReleaseState, reference: &ReleaseState) -> bool {
        (estimate.p0c() - reference.p0c()).norm() > self.position_threshold
            || (estimate.v0c() - reference.v0c()).norm() > self.velocity_threshold
    }
}

/// Everything the correction solve needs besides the estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionContext {
    pub params: RobotParams,
    pub target: TargetSpec,
    pub solver: SolverConfig,
    pub riccati: RiccatiConfig,
}

#[derive(Debug, Clone)]
pub enum CorrectionOutcome {
    NoChange,
    Corrected { plan: Box<Plan>, elapsed: f64 },
    BudgetExhausted { elapsed: f64 },
    Infeasible { elapsed: f64 },
}

impl CorrectionOutcome {
    pub fn plan(&self) -> Option<&Plan> {
        match self {
            Self::Corrected { plan, .. } => Some(plan),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::NoChange => "no-change",
            Self::Corrected { .. } => "corrected",
            Self::BudgetExhausted { .. } => "budget-exhausted",
            Self::Infeasible { .. } => "infeasible",
        }
    }
}

/// Re-plans the flight from `estimate` when it deviates from the prior's
/// release, and synthesizes gains for the new reference.
pub fn correct_trajectory(
    policy: &CorrectionPolicy,
    ctx: &CorrectionContext,
    estimate: &ReleaseState,
    prior: &Plan,
    attempt: u32,
    cancel: Option<&CancelToken>,
) -> Result<CorrectionOutcome> {
    policy.validate()?;
    if !policy.deviates(estimate, &prior.trajectory.release) {
        return Ok(CorrectionOutcome::NoChange);
    }
    let start = Instant::now();
    let mut solver = ctx.solver;
    solver.nlp.wall_clock_budget = policy.enforce_budget.then_some(policy.budget);
    if policy.work_budget.is_some() {
        solver.nlp.work_budget = policy.work_budget;
    }
    let request = OnlinePlanRequest {
        estimate: *estimate,
        target: ctx.target,
        params: ctx.params,
        prior: prior.trajectory.clone(),
        n_flight: policy.n_flight,
        solver,
        attempt,
    };
    let outcome = match plan_flight(&request, cancel) {
        Ok(o) => o,
        Err(Error::SingularMassMatrix(_)) | Err(Error::UndefinedAttackAngle(_)) => {
            return Ok(CorrectionOutcome::Infeasible {
                elapsed: start.elapsed().as_secs_f64(),
            })
        }
        Err(e) => return Err(e),
    };
    let over_budget = || policy.enforce_budget && start.elapsed().as_secs_f64() > policy.budget;
    match outcome.status {
        SolveStatus::Infeasible => {
            let elapsed = start.elapsed().as_secs_f64();
            return Ok(if over_budget() || outcome.solution.interrupted {
                CorrectionOutcome::BudgetExhausted { elapsed }
            } else {
                CorrectionOutcome::Infeasible { elapsed }
            });
        }
        SolveStatus::Converged | SolveStatus::BudgetExhaustedFeasible => {}
    }
    let gains = match riccati_backward(&outcome.spline, &ctx.params, &ctx.riccati) {
        Ok(g) => g,
        Err(Error::RiccatiBlowUp { .. }) => {
            return Ok(CorrectionOutcome::Infeasible {
                elapsed: start.elapsed().as_secs_f64(),
            })
        }
        Err(e) => return Err(e),
    };
    let elapsed = start.elapsed().as_secs_f64();
    if over_budget() {
        return Ok(CorrectionOutcome::BudgetExhausted { elapsed });
    }
    Ok(CorrectionOutcome::Corrected {
        plan: Box::new(Plan::new(outcome.spline, gains)?),
        elapsed,
    })
}

/// Plan shared between the control loop and background corrections.
/// Readers never block; a publish replaces the whole plan at once.
#[derive(Debug)]
pub struct PlanHandle {
    current: ArcSwap<Plan>,
}

impl PlanHandle {
    pub fn new(plan: Plan) -> Self {
        Self {
            current: ArcSwap::from_pointee(plan),
        }
    }

    pub fn load(&self) -> Arc<Plan> {
        self.current.load_full()
    }

    pub fn publish(&self, plan: Plan) {
        self.current.store(Arc::new(plan));
    }
}

/// Runs one correction attempt on a worker thread and publishes the result
/// into `handle` if it succeeds.
pub fn spawn_correction(
    handle: Arc<PlanHandle>,
    policy: CorrectionPolicy,
    ctx: CorrectionContext,
    estimate: ReleaseState,
    attempt: u32,
    cancel: Option<CancelToken>,
) -> JoinHandle<Result<CorrectionOutcome>> {
    std::thread::spawn(move || {
        let prior = handle.load();
        let outcome = correct_trajectory(&policy, &ctx, &estimate, &prior, attempt, cancel.as_ref())?;
        if let Some(plan) = outcome.plan() {
            handle.publish(plan.clone());
        }
        Ok(outcome)
    })
}
