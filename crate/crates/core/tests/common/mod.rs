//! Nominal plan and controller shared by the integration tests.
#![allow(dead_code)]

use std::sync::OnceLock;

use trapeze_core::control::{riccati_solve, CorrectionContext, CorrectionPolicy, Plan, RiccatiConfig, RiccatiSolution};
use trapeze_core::dynamics::{RobotParams, State, TargetSpec};
use trapeze_core::planner::{plan_full, KnotGrid, PlanOutcome, PlanRequest, SolverConfig};

pub struct Nominal {
    pub request: PlanRequest,
    pub outcome: PlanOutcome,
    pub riccati: RiccatiSolution,
    pub plan: Plan,
    pub ctx: CorrectionContext,
}

impl Nominal {
    /// Correction policy with the deterministic budget only.
    pub fn policy(&self) -> CorrectionPolicy {
        CorrectionPolicy {
            enforce_budget: false,
            ..CorrectionPolicy::default()
        }
    }
}

pub fn request() -> PlanRequest {
    let params = RobotParams::default();
    PlanRequest {
        x0: State::new(-params.kappa1, params.kappa1, 0.0, 0.0),
        target: TargetSpec::default(),
        params,
        grid: KnotGrid::default(),
        solver: SolverConfig::default(),
    }
}

pub fn nominal() -> &'static Nominal {
    static CELL: OnceLock<Nominal> = OnceLock::new();
    CELL.get_or_init(|| {
        let request = request();
        let outcome = plan_full(&request, None).expect("nominal plan");
        let riccati_cfg = RiccatiConfig::default();
        let riccati = riccati_solve(&outcome.spline, &request.params, &riccati_cfg).expect("riccati");
        let plan = Plan::new(outcome.spline.clone(), riccati.schedule.clone()).expect("plan");
        let ctx = CorrectionContext {
            params: request.params,
            target: request.target,
            solver: request.solver,
            riccati: riccati_cfg,
        };
        Nominal {
            request,
            outcome,
            riccati,
            plan,
            ctx,
        }
    })
}

use trapeze_core::dynamics::{rk4_step, Phase, PhaseParams};
use trapeze_core::planner::{hermite_simpson_defect, TrajectorySpline};

/// Integrates the plan's own control from its initial state with 1 ms RK4,
/// switching model at the planned release, and returns the final state.
pub fn reintegrate(spline: &TrajectorySpline, params: &RobotParams) -> State {
    let swing = PhaseParams::new(params, Phase::Swing);
    let flight = PhaseParams::new(params, Phase::Flight);
    let (mut t, end) = (spline.start_time(), spline.end_time());
    let mut x = spline.state(t);
    let dt: f64 = 1e-3;
    while t < end - 1e-12 {
        let in_swing = t < spline.t_rel - 1e-12;
        let limit = if in_swing { spline.t_rel } else { end };
        let h = dt.min(limit - t);
        let model = if in_swing { &swing } else { &flight };
        // hold the swing side of the control inside a swing step
        let u = |s: f64| {
            spline.control(if in_swing {
                s.min(spline.t_rel - 1e-12)
            } else {
                s.max(spline.t_rel)
            })
        };
        x = rk4_step(model, &x, t, h, u).expect("finite");
        t += h;
    }
    x
}

/// Slope of log(total defect) against log(segment length) for `n` equal
/// segments over one second of a smooth flight trajectory.
pub fn defect_order(ns: &[usize]) -> f64 {
    let model = PhaseParams::new(&RobotParams::default(), Phase::Flight);
    let u = |t: f64| 0.3 * (3.0 * t).sin();
    let x0 = State::new(0.2, 0.5, 1.0, -2.0);
    let exact = |t: f64| {
        let steps = 20_000;
        let dt = t / steps as f64;
        let mut x = x0;
        for i in 0..steps {
            x = rk4_step(&model, &x, i as f64 * dt, dt, u).unwrap();
        }
        x
    };
    let points: Vec<(f64, f64)> = ns
        .iter()
        .map(|&n| {
            let h = 1.0 / n as f64;
            let xs: Vec<State> = (0..=n).map(|k| exact(k as f64 * h)).collect();
            let total: f64 = (0..n)
                .map(|k| {
                    let t = k as f64 * h;
                    hermite_simpson_defect(&model, &xs[k], &xs[k + 1], u(t), u(t + 0.5 * h), u(t + h), h)
                        .unwrap()
                        .norm()
                })
                .sum();
            (h.ln(), total.ln())
        })
        .collect();
    let m = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
    let (mx, my) = (sx / m, sy / m);
    let num: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let den: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    num / den
}
