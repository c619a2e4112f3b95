//! Minimum-effort trajectory planning by direct collocation.

pub mod nlp;
mod spline;
mod transcription;

use std::f64::consts::TAU;

use nalgebra::Vector2;

pub use nlp::{AugmentedLagrangian, CancelToken, NlpOptions, NlpProblem, NlpSolution, WarmStart};
pub use spline::{hermite_coefficients, SolveStatus, SplineMetadata, TrajectorySpline, TRAJECTORY_FORMAT};
pub use transcription::{
    approach_residuals, hermite_simpson_defect, hermite_simpson_jacobian, simpson_cost, terminal_residual,
    window_knots, BoxBounds, DefectJacobian, KnotGrid, Layout, Mode, SolverConfig, Transcription,
};

use crate::dynamics::{ReleaseState, RobotParams, State, TargetSpec};
use crate::error::Result;

/// Offline request: plan swing and flight from a resting start.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanRequest {
    pub x0: State,
    pub target: TargetSpec,
    pub params: RobotParams,
    pub grid: KnotGrid,
    pub solver: SolverConfig,
}

/// Online request: re-plan the flight from an estimated release.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlinePlanRequest {
    pub estimate: ReleaseState,
    pub target: TargetSpec,
    pub params: RobotParams,
    pub prior: TrajectorySpline,
    pub n_flight: usize,
    pub solver: SolverConfig,
    pub attempt: u32,
}

#[derive(Debug, Clone)]
pub struct PlanOutcome {
    pub spline: TrajectorySpline,
    pub cost: f64,
    pub status: SolveStatus,
    pub solution: NlpSolution,
}

pub fn transcribe_full(req: &PlanRequest) -> Result<Transcription> {
    req.solver.validate()?;
    Transcription::full(&req.params, &req.target, req.x0, req.grid, &req.solver.bounds)
}

pub fn transcribe_flight(req: &OnlinePlanRequest) -> Result<Transcription> {
    req.solver.validate()?;
    Transcription::flight(&req.params, &req.target, req.estimate, req.n_flight, &req.solver.bounds)
}

/// Cold-start guess: straight line in state space from `x0` to a terminal
/// posture that points the gripper at the target, zero control, one second
/// per phase.
pub fn cold_start(tr: &Transcription, x0: &State) -> Vec<f64> {
    let l = tr.layout;
    let (t0, t1) = (1.0, 1.0);
    let target = &tr.target;
    // bearing of the target from the lowest point of the swing
    let low = Vector2::new(0.0, -tr.params.l_h);
    let to_target = Vector2::from(target.p0t) - low;
    let bearing = to_target[1].atan2(to_target[0]);
    let band_mid = 0.5 * (target.gamma_min + target.gamma_max);
    let alpha_end = TAU * target.nu as f64 + band_mid + bearing - tr.params.r_0_g;
    let x_end = State::new(alpha_end, 0.0, 0.0, 0.0);
    let total = t0 + t1;
    let slope = (x_end - x0) / total;

    let mut z = vec![0.0; l.dim()];
    for k in 0..l.knots() {
        let t = if k <= l.n_swing {
            k as f64 * t0 / l.n_swing as f64
        } else {
            t0 + (k - l.n_swing) as f64 * t1 / l.n_flight as f64
        };
        let x = x0 + (x_end - x0) * (t / total);
        let i = l.x(k);
        z[i] = x[0];
        z[i + 1] = x[1];
        z[i + 2] = slope[0];
        z[i + 3] = slope[1];
    }
    if l.has_swing {
        z[l.t0()] = t0;
    }
    z[l.t1()] = t1;
    if !l.has_swing {
        z[l.upsilon()] = target.somersault_offset();
    }
    z
}

/// Samples the flight portion of `prior` onto the online grid, starting the
/// clock at the estimated release time.
pub fn warm_start_from(prior: &TrajectorySpline, tr: &Transcription) -> Vec<f64> {
    let l = tr.layout;
    let duration = (prior.end_time() - prior.t_rel).max(tr.lower_bounds()[l.t1()]);
    let h = duration / l.n_flight as f64;
    let mut z = vec![0.0; l.dim()];
    let (start, x_hat) = match &tr.mode {
        Mode::Flight { release } => (prior.t_rel, Some(release.state())),
        Mode::Full { .. } => (prior.t_rel, None),
    };
    for j in 0..=l.n_flight {
        let k = l.n_swing + j;
        let t = start + j as f64 * h;
        let mut x = prior.state(t);
        if let (0, Some(xh)) = (j, x_hat) {
            x = xh;
        }
        let i = l.x(k);
        z[i..i + 4].copy_from_slice(x.as_slice());
        z[l.seg_u0(k)] = prior.control(t);
        if j < l.n_flight {
            z[l.um(k)] = prior.control(t + 0.5 * h);
        }
    }
    z[l.t1()] = duration;
    if !l.has_swing {
        z[l.upsilon()] = prior.metadata.approach_offset;
    }
    z
}

/// Runs the augmented-Lagrangian solver and packages the result as a spline.
pub fn solve(
    tr: &Transcription,
    config: &SolverConfig,
    guess: WarmStart,
    cancel: Option<&CancelToken>,
    attempt: u32,
) -> Result<PlanOutcome> {
    tr.check_dimension(&guess.z)?;
    let solution = AugmentedLagrangian::new(config.nlp).solve(tr, guess, cancel)?;
    let spline = build_spline(tr, &solution, attempt)?;
    Ok(PlanOutcome {
        cost: solution.cost,
        status: solution.status,
        spline,
        solution,
    })
}

fn build_spline(tr: &Transcription, sol: &NlpSolution, attempt: u32) -> Result<TrajectorySpline> {
    let z = &sol.z;
    let l = tr.layout;
    let breakpoints: Vec<f64> = (0..l.knots()).map(|k| tr.knot_time(z, k)).collect();
    let states: Vec<State> = (0..l.knots()).map(|k| tr.state(z, k)).collect();
    let derivs = (0..l.segments())
        .map(|k| tr.segment_end_rates(z, k))
        .collect::<Result<Vec<_>>>()?;
    let phases = (0..l.segments()).map(|k| tr.segment_phase(k)).collect();
    let metadata = SplineMetadata {
        cost: sol.cost,
        status: sol.status,
        approach_offset: tr.approach_offset(z),
        outer_iterations: sol.outer_iterations,
        max_violation: sol.max_violation,
        attempt,
    };
    TrajectorySpline::from_knots(
        breakpoints,
        phases,
        &states,
        &derivs,
        &tr.segment_controls(z),
        tr.release(z),
        metadata,
    )
}

/// Plans the full maneuver from a cold start.
pub fn plan_full(req: &PlanRequest, cancel: Option<&CancelToken>) -> Result<PlanOutcome> {
    let tr = transcribe_full(req)?;
    let guess = cold_start(&tr, &req.x0);
    solve(&tr, &req.solver, WarmStart::cold(guess), cancel, 0)
}

/// Re-plans the flight, warm-started from the prior plan.
pub fn plan_flight(req: &OnlinePlanRequest, cancel: Option<&CancelToken>) -> Result<PlanOutcome> {
    let tr = transcribe_flight(req)?;
    let guess = warm_start_from(&req.prior, &tr);
    solve(&tr, &req.solver, WarmStart::cold(guess), cancel, req.attempt)
}
