//! Closed-loop hybrid plant simulation and the landing predicate.

use std::sync::Arc;

use nalgebra::Vector2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::control::{
    correct_trajectory, estimate_release, open_loop_control, tvlqr_control, CorrectionContext, CorrectionOutcome,
    CorrectionPolicy, EstimatorWindow, HipSample, Plan,
};
use crate::dynamics::{
    attack_angle_from, com_offset, gripper_offset, release_map, rk4_step, Phase, PhaseParams, ReleaseState,
    RobotParams, State, TargetSpec,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerMode {
    /// Feedforward only.
    OpenLoop,
    /// Posture tracking, no trajectory correction.
    PostureOnly,
    /// Posture tracking with trajectory correction.
    PostureCorrection,
}

impl ControllerMode {
    pub const ALL: [ControllerMode; 3] = [Self::OpenLoop, Self::PostureOnly, Self::PostureCorrection];

    pub fn label(self) -> &'static str {
        match self {
            Self::OpenLoop => "open-loop",
            Self::PostureOnly => "tc0",
            Self::PostureCorrection => "tc1",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailTag {
    Miss,
    BadApproach,
    Diverged,
    NoFlight,
}

impl FailTag {
    pub fn label(self) -> &'static str {
        match self {
            Self::Miss => "miss",
            Self::BadApproach => "bad-approach",
            Self::Diverged => "diverged",
            Self::NoFlight => "no-flight",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    /// Plant parameters.
    pub params: RobotParams,
    /// Offsets added to the planned initial `(alpha, beta)` (rad).
    pub initial_perturbation: [f64; 2],
    /// Release-time offset from the planned release (s).
    pub release_jitter: f64,
    /// Start in flight at the planned release with `(d_alpha, d_alpha_dot)`
    /// added to the planned release state.
    pub release_perturbation: Option<[f64; 2]>,
    pub mode: ControllerMode,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn nominal(params: RobotParams, mode: ControllerMode) -> Self {
        Self {
            params,
            initial_perturbation: [0.0; 2],
            release_jitter: 0.0,
            release_perturbation: None,
            mode,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Integration and control step (s).
    pub step: f64,
    /// Standard deviation of hip-position measurements (m).
    pub measurement_noise: f64,
    /// Delay after release before the first correction attempt (s).
    pub first_correction: f64,
    /// Delay between correction attempts (s).
    pub correction_spacing: f64,
    /// Delay between the start of a correction and its plan taking effect (s).
    pub apply_delay: f64,
    /// Simulated time past the end of the initial plan (s).
    pub horizon_margin: f64,
    /// Landing tolerance (m).
    pub success_radius: f64,
    /// State magnitude treated as divergence.
    pub divergence_limit: f64,
    pub keep_log: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            step: 1e-3,
            measurement_noise: 1e-3,
            first_correction: 0.05,
            correction_spacing: 0.1,
            apply_delay: 0.0,
            horizon_margin: 0.2,
            success_radius: 0.05,
            divergence_limit: 1e3,
            keep_log: true,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) {
            return Err(Error::invalid("sim.step", "must be positive"));
        }
        if !(self.measurement_noise >= 0.0) {
            return Err(Error::invalid("sim.measurement_noise", "must be non-negative"));
        }
        if !(self.first_correction > 0.0 && self.correction_spacing > 0.0 && self.apply_delay >= 0.0) {
            return Err(Error::invalid("sim", "correction timing must be positive"));
        }
        if !(self.horizon_margin >= 0.0 && self.success_radius > 0.0) {
            return Err(Error::invalid("sim", "horizon margin and success radius"));
        }
        Ok(())
    }
}

/// One fixed-step log entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub t: f64,
    pub phase: u8,
    pub alpha: f64,
    pub beta: f64,
    pub alpha_dot: f64,
    pub beta_dot: f64,
    pub u: f64,
    pub saturated: bool,
    pub gripper_x: f64,
    pub gripper_y: f64,
    pub dist: f64,
    /// Attack angle plus the active plan's approach offset; NaN in swing.
    pub psi: f64,
    /// Flight angular momentum about the COM; NaN in swing.
    pub momentum: f64,
    pub plan_attempt: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub success: bool,
    pub min_dist: f64,
    pub psi_at_min: f64,
    pub fail_tag: Option<FailTag>,
}

/// Streaming form of the landing predicate.
#[derive(Debug, Clone)]
struct VerdictTracker {
    radius: f64,
    target: TargetSpec,
    min_dist: f64,
    psi_at_min: f64,
    landed: bool,
    close: bool,
}

impl VerdictTracker {
    fn new(target: &TargetSpec, radius: f64) -> Self {
        Self {
            radius,
            target: *target,
            min_dist: f64::INFINITY,
            psi_at_min: f64::NAN,
            landed: false,
            close: false,
        }
    }

    fn observe(&mut self, dist: f64, psi: f64) {
        if dist < self.min_dist {
            self.min_dist = dist;
            self.psi_at_min = psi;
        }
        if dist <= self.radius {
            self.close = true;
            if self.target.in_band(psi) {
                self.landed = true;
            }
        }
    }

    fn finish(&self) -> Verdict {
        let fail_tag = match (self.landed, self.close) {
            (true, _) => None,
            (false, true) => Some(FailTag::BadApproach),
            (false, false) => Some(FailTag::Miss),
        };
        Verdict {
            success: self.landed,
            min_dist: self.min_dist,
            psi_at_min: self.psi_at_min,
            fail_tag,
        }
    }
}

/// Landing predicate: some flight instant within `radius` of the target
/// while the offset attack angle is inside the band.
pub fn success_test(log: &[LogRow], target: &TargetSpec, radius: f64) -> Verdict {
    let mut tracker = VerdictTracker::new(target, radius);
    for row in log.iter().filter(|r| r.phase == Phase::Flight.index()) {
        tracker.observe(row.dist, row.psi);
    }
    tracker.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionEvent {
    pub t: f64,
    pub attempt: u32,
    pub outcome: String,
    /// Solver wall-clock time (s). Left out of serialized output so that
    /// artifacts stay reproducible.
    #[serde(skip)]
    pub elapsed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub seed: u64,
    pub mode: ControllerMode,
    pub success: bool,
    pub min_dist: f64,
    pub psi_at_min: f64,
    pub fail_tag: Option<FailTag>,
    /// Corrections that produced and applied a new plan.
    pub corrections: u32,
    /// Correction attempts that ended infeasible, over budget, or in error.
    pub corrections_unavailable: u32,
    pub events: Vec<CorrectionEvent>,
    /// Number of times the release estimator was evaluated.
    pub estimator_reads: u32,
    pub t_release: f64,
    pub log: Vec<LogRow>,
}

impl SimResult {
    /// Gripper path during flight.
    pub fn gripper_path(&self) -> Vec<[f64; 2]> {
        self.log
            .iter()
            .filter(|r| r.phase == Phase::Flight.index())
            .map(|r| [r.gripper_x, r.gripper_y])
            .collect()
    }
}

const MEASUREMENT_STREAM: u64 = 0x6d65_6173_7572_6521;

/// Simulates one scenario against the true plant.
pub fn integrate_hybrid(
    plan: &Plan,
    ctx: &CorrectionContext,
    policy: &CorrectionPolicy,
    scenario: &ScenarioSpec,
    cfg: &SimConfig,
) -> Result<SimResult> {
    cfg.validate()?;
    scenario.params.validate()?;
    let truth = scenario.params;
    let swing = PhaseParams::new(&truth, Phase::Swing);
    let flight = PhaseParams::new(&truth, Phase::Flight);
    let target = ctx.target;
    let u_max = ctx.solver.bounds.u_max;
    let reference = &plan.trajectory;

    let mut result = SimResult {
        seed: scenario.seed,
        mode: scenario.mode,
        success: false,
        min_dist: f64::INFINITY,
        psi_at_min: f64::NAN,
        fail_tag: None,
        corrections: 0,
        corrections_unavailable: 0,
        events: Vec::new(),
        estimator_reads: 0,
        t_release: reference.t_rel + scenario.release_jitter,
        log: Vec::new(),
    };

    let mut active: Arc<Plan> = Arc::new(plan.clone());
    let mut pending: Option<(f64, Arc<Plan>)> = None;
    let mut release: Option<ReleaseState> = None;
    let mut window: Option<EstimatorWindow> = None;
    let mut tracker = VerdictTracker::new(&target, cfg.success_radius);
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed ^ MEASUREMENT_STREAM);
    let noise = (cfg.measurement_noise > 0.0).then(|| Normal::new(0.0, cfg.measurement_noise).expect("valid noise"));
    let correcting = scenario.mode == ControllerMode::PostureCorrection;
    let mut next_attempt = 1u32;

    let (mut t, mut x) = match scenario.release_perturbation {
        Some([da, dad]) => {
            let x_nom = reference.release.state();
            let x = x_nom + State::new(da, 0.0, dad, 0.0);
            result.t_release = reference.t_rel;
            (reference.t_rel, x)
        }
        None => {
            let [da, db] = scenario.initial_perturbation;
            let t0 = reference.start_time();
            (t0, reference.state(t0) + State::new(da, db, 0.0, 0.0))
        }
    };
    let end_time = reference.end_time() + cfg.horizon_margin;
    if scenario.release_perturbation.is_none() && result.t_release >= reference.end_time() {
        result.fail_tag = Some(FailTag::NoFlight);
        return Ok(result);
    }

    loop {
        if release.is_none() && t >= result.t_release - 1e-12 {
            let r = release_map(&truth, &x, t);
            if correcting {
                window = Some(EstimatorWindow::new(t, x, cfg.measurement_noise));
            }
            release = Some(r);
        }
        if let Some((at, _)) = &pending {
            if t >= *at - 1e-12 {
                active = pending.take().expect("pending plan").1;
            }
        }
        if let (Some(rel), true) = (&release, correcting) {
            let trigger = rel.t_rel + cfg.first_correction + (next_attempt - 1) as f64 * cfg.correction_spacing;
            if next_attempt <= policy.max_attempts && t >= trigger - 1e-12 {
                let win = window.as_ref().expect("window exists while correcting");
                result.estimator_reads += 1;
                let attempt = next_attempt;
                next_attempt += 1;
                let event = match estimate_release(win, &ctx.params) {
                    Err(e) => {
                        result.corrections_unavailable += 1;
                        CorrectionEvent {
                            t,
                            attempt,
                            outcome: format!("estimate-failed: {e}"),
                            elapsed: 0.0,
                        }
                    }
                    Ok(est) => match correct_trajectory(policy, ctx, &est, &active, attempt, None) {
                        Ok(CorrectionOutcome::Corrected { plan, elapsed }) => {
                            result.corrections += 1;
                            pending = Some((t + cfg.apply_delay, Arc::new(*plan)));
                            CorrectionEvent {
                                t,
                                attempt,
                                outcome: "corrected".into(),
                                elapsed,
                            }
                        }
                        Ok(CorrectionOutcome::NoChange) => CorrectionEvent {
                            t,
                            attempt,
                            outcome: "no-change".into(),
                            elapsed: 0.0,
                        },
                        Ok(other) => {
                            result.corrections_unavailable += 1;
                            let elapsed = match other {
                                CorrectionOutcome::BudgetExhausted { elapsed }
                                | CorrectionOutcome::Infeasible { elapsed } => elapsed,
                                _ => 0.0,
                            };
                            CorrectionEvent {
                                t,
                                attempt,
                                outcome: other.label().into(),
                                elapsed,
                            }
                        }
                        Err(e) => {
                            result.corrections_unavailable += 1;
                            CorrectionEvent {
                                t,
                                attempt,
                                outcome: format!("error: {e}"),
                                elapsed: 0.0,
                            }
                        }
                    },
                };
                if let Some((at, _)) = &pending {
                    if t >= *at - 1e-12 {
                        active = pending.take().expect("pending plan").1;
                    }
                }
                result.events.push(event);
            }
        }

        let out = match scenario.mode {
            ControllerMode::OpenLoop => open_loop_control(&active.trajectory, t, u_max),
            _ => tvlqr_control(&active.gains, &active.trajectory, &x, t, u_max),
        };

        if let Some(rel) = &release {
            let g = rel.com_at(t) + com_offset(&truth, x[0], x[1]) + gripper_offset(&truth, x[0]);
            let d = Vector2::from(target.p0t) - g;
            let dist = d.norm();
            let psi = attack_angle_from(&truth, x[0], &d)
                .map(|p| p + active.trajectory.metadata.approach_offset)
                .unwrap_or(f64::NAN);
            tracker.observe(dist, psi);
            if let Some(win) = window.as_mut() {
                if t > rel.t_rel {
                    let mut hip = rel.com_at(t) + com_offset(&truth, x[0], x[1]);
                    if let Some(n) = &noise {
                        hip += Vector2::new(n.sample(&mut rng), n.sample(&mut rng));
                    }
                    win.push(HipSample {
                        t,
                        hip: [hip[0], hip[1]],
                        joints: [x[0], x[1]],
                    });
                }
            }
            if cfg.keep_log {
                result.log.push(log_row(
                    t,
                    Phase::Flight,
                    &x,
                    out.u,
                    out.saturated,
                    &g,
                    dist,
                    psi,
                    flight.momentum_alpha(&x),
                    active.attempt(),
                ));
            }
        } else if cfg.keep_log {
            let g = Vector2::new(f64::NAN, f64::NAN);
            result.log.push(log_row(
                t,
                Phase::Swing,
                &x,
                out.u,
                out.saturated,
                &g,
                f64::NAN,
                f64::NAN,
                f64::NAN,
                active.attempt(),
            ));
        }

        if t >= end_time - 1e-12 {
            break;
        }
        let mut h = cfg.step.min(end_time - t);
        if release.is_none() && t + h > result.t_release {
            h = result.t_release - t;
        }
        let model = if release.is_some() { &flight } else { &swing };
        let stepped = rk4_step(model, &x, t, h, |_| out.u);
        match stepped {
            Ok(next) if next.iter().all(|v| v.is_finite() && v.abs() < cfg.divergence_limit) => x = next,
            _ => {
                result.fail_tag = Some(FailTag::Diverged);
                result.min_dist = tracker.min_dist;
                result.psi_at_min = tracker.psi_at_min;
                return Ok(result);
            }
        }
        t += h;
    }

    let verdict = tracker.finish();
    result.success = verdict.success;
    result.min_dist = verdict.min_dist;
    result.psi_at_min = verdict.psi_at_min;
    result.fail_tag = verdict.fail_tag;
    Ok(result)
}

#[allow(clippy::too_many_arguments)]
fn log_row(
    t: f64,
    phase: Phase,
    x: &State,
    u: f64,
    saturated: bool,
    g: &Vector2<f64>,
    dist: f64,
    psi: f64,
    momentum: f64,
    plan_attempt: u32,
) -> LogRow {
    LogRow {
        t,
        phase: phase.index(),
        alpha: x[0],
        beta: x[1],
        alpha_dot: x[2],
        beta_dot: x[3],
        u,
        saturated,
        gripper_x: g[0],
        gripper_y: g[1],
        dist,
        psi,
        momentum,
        plan_attempt,
    }
}
