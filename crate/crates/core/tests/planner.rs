mod common;

use trapeze_core::dynamics::{attack_angle, gripper_world};
use trapeze_core::error::Error;
use trapeze_core::planner::{
    plan_flight, plan_full, window_knots, KnotGrid, OnlinePlanRequest, SolveStatus, TrajectorySpline,
};

#[test]
fn nominal_plan_reaches_target_inside_opening() {
    let n = common::nominal();
    let s = &n.outcome.spline;
    let (p, target) = (&n.request.params, &n.request.target);
    assert!(n.outcome.status.is_feasible(), "{:?}", n.outcome.status);

    let end = s.end_time();
    let x = s.state(end);
    let g = gripper_world(p, &s.release, x[0], x[1], end);
    let miss = (g - nalgebra::Vector2::from(target.p0t)).norm();
    assert!(miss < 1e-4, "terminal error {miss:e}");

    let n_flight = n.request.grid.n_flight;
    let knots = window_knots(n_flight, target);
    assert!(!knots.is_empty());
    for j in knots {
        let t = s.t_rel + (end - s.t_rel) * j as f64 / n_flight as f64;
        let psi = attack_angle(p, &s.release, &s.state(t), t, target).unwrap() + s.metadata.approach_offset;
        assert!(
            psi >= target.gamma_min - 1e-6 && psi <= target.gamma_max + 1e-6,
            "knot {j}: {psi}"
        );
    }
}

#[test]
fn reintegration_tracks_the_spline() {
    let n = common::nominal();
    let s = &n.outcome.spline;
    let x = common::reintegrate(s, &n.request.params);
    let err = (x - s.state(s.end_time())).norm();
    assert!(err < 1e-3, "re-integration error {err:e}");
}

#[test]
fn summed_defect_is_fourth_order() {
    let order = common::defect_order(&[8, 16, 32, 64]);
    assert!((order - 4.0).abs() <= 0.5, "order {order}");
}

#[test]
fn plan_survives_json() {
    let s = &common::nominal().outcome.spline;
    let back = TrajectorySpline::from_json(&s.to_json()).unwrap();
    for k in 0..=40 {
        let t = s.start_time() + (s.end_time() - s.start_time()) * k as f64 / 40.0;
        assert_eq!(back.state(t), s.state(t));
        assert_eq!(back.control(t), s.control(t));
    }
}

#[test]
fn flight_replan_from_exact_release_keeps_the_landing() {
    let n = common::nominal();
    let s = &n.outcome.spline;
    let req = OnlinePlanRequest {
        estimate: s.release,
        target: n.request.target,
        params: n.request.params,
        prior: s.clone(),
        n_flight: 25,
        solver: n.request.solver,
        attempt: 1,
    };
    let out = plan_flight(&req, None).unwrap();
    assert_eq!(out.status, SolveStatus::Converged);
    assert_eq!(out.spline.metadata.attempt, 1);
    let end = out.spline.end_time();
    let x = out.spline.state(end);
    let g = gripper_world(&req.params, &out.spline.release, x[0], x[1], end);
    assert!((g - nalgebra::Vector2::from(req.target.p0t)).norm() < 1e-4);
    assert!((out.spline.t_rel - s.t_rel).abs() < 1e-12);
}

#[test]
fn coarse_grid_without_window_point_is_rejected() {
    let mut req = common::request();
    req.grid = KnotGrid {
        n_swing: 10,
        n_flight: 4,
    };
    req.target.phi_min = 0.80;
    req.target.phi_max = 0.85;
    assert!(matches!(plan_full(&req, None), Err(Error::EmptyApproachWindow { .. })));
}
