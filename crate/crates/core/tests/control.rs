mod common;

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use trapeze_core::control::{
    correct_trajectory, spawn_correction, CorrectionOutcome, CorrectionPolicy, Plan, PlanHandle,
};
use trapeze_core::dynamics::{release_map, State};
use trapeze_core::sim::{integrate_hybrid, ControllerMode, ScenarioSpec, SimConfig};

#[test]
fn cost_to_go_stays_symmetric_and_positive() {
    let n = common::nominal();
    let h = &n.riccati.health;
    assert!(h.min_eigenvalue > 0.0, "{h:?}");
    assert!(h.max_asymmetry < 1e-9, "{h:?}");
    for s in &n.riccati.cost_to_go {
        assert!((s - s.transpose()).abs().max() <= 1e-9 * s.norm().max(1.0));
        assert!(s.symmetric_eigenvalues().min() > -1e-9);
    }
}

#[test]
fn gain_has_no_jump_at_release() {
    let g = &common::nominal().riccati.schedule;
    let k = g.gain(g.t_rel);
    let mut prev = f64::INFINITY;
    for eps in [1e-4, 1e-6, 1e-8] {
        let jump = (g.gain(g.t_rel - eps) - k)
            .norm()
            .max((g.gain(g.t_rel + eps) - k).norm());
        assert!(jump < prev, "eps {eps}: {jump}");
        prev = jump;
    }
    assert!(prev < 1e-3 * k.norm().max(1.0));
    let i = g
        .breakpoints
        .iter()
        .position(|&b| b == g.t_rel)
        .expect("release is a breakpoint");
    let s = &common::nominal().riccati.cost_to_go;
    let ds = (s[i + 1] - s[i]).norm().max((s[i] - s[i - 1]).norm());
    assert!(ds < 0.05 * s[i].norm().max(1.0), "cost-to-go step {ds}");
}

fn run(
    mode: ControllerMode,
    tweak: impl FnOnce(&mut ScenarioSpec),
    policy: &CorrectionPolicy,
) -> trapeze_core::sim::SimResult {
    let n = common::nominal();
    let mut spec = ScenarioSpec::nominal(n.ctx.params, mode);
    tweak(&mut spec);
    integrate_hybrid(&n.plan, &n.ctx, policy, &spec, &SimConfig::default()).unwrap()
}

#[test]
fn posture_control_absorbs_initial_error() {
    let policy = common::nominal().policy();
    for p in [[0.01, 0.01], [0.01, -0.01], [-0.01, 0.01], [-0.01, -0.01]] {
        let r = run(ControllerMode::PostureOnly, |s| s.initial_perturbation = p, &policy);
        assert!(r.min_dist <= 0.05, "{p:?}: {}", r.min_dist);
    }
}

#[test]
fn late_release_needs_correction() {
    let policy = CorrectionPolicy::default();
    let tc0 = run(ControllerMode::PostureOnly, |s| s.release_jitter = 0.02, &policy);
    assert!(tc0.min_dist > 0.05, "tc0 {}", tc0.min_dist);
    assert_eq!(tc0.estimator_reads, 0);
    assert!(tc0.events.is_empty());

    let tc1 = run(ControllerMode::PostureCorrection, |s| s.release_jitter = 0.02, &policy);
    assert!(tc1.min_dist <= 0.05, "tc1 {}", tc1.min_dist);
    assert!(tc1.success);
    assert!(tc1.corrections >= 1);
    for e in tc1.events.iter().filter(|e| e.outcome == "corrected") {
        assert!(e.elapsed < policy.budget, "correction took {} s", e.elapsed);
    }
}

#[test]
fn successive_corrections_advance_the_plan() {
    let policy = CorrectionPolicy {
        position_threshold: 0.0,
        velocity_threshold: 0.0,
        ..common::nominal().policy()
    };
    let r = run(ControllerMode::PostureCorrection, |s| s.release_jitter = 0.01, &policy);
    let attempts: Vec<u32> = r.events.iter().map(|e| e.attempt).collect();
    assert_eq!(attempts, vec![1, 2]);
    assert_eq!(r.corrections, 2, "{:?}", r.events);
    let mut seen: Vec<u32> = r.log.iter().map(|row| row.plan_attempt).collect();
    seen.dedup();
    assert_eq!(seen, vec![0, 1, 2]);
    assert!(r.success, "min {}", r.min_dist);
}

#[test]
fn unchanged_release_keeps_the_plan() {
    let n = common::nominal();
    let out = correct_trajectory(&n.policy(), &n.ctx, &n.plan.trajectory.release, &n.plan, 1, None).unwrap();
    assert!(matches!(out, CorrectionOutcome::NoChange));
}

fn shifted_release() -> trapeze_core::dynamics::ReleaseState {
    let n = common::nominal();
    let r = &n.plan.trajectory.release;
    release_map(&n.ctx.params, &(r.state() + State::new(0.01, 0.0, 0.08, 0.0)), r.t_rel)
}

#[test]
fn background_correction_publishes_a_consistent_plan() {
    let n = common::nominal();
    let handle = Arc::new(PlanHandle::new(n.plan.clone()));
    let job = spawn_correction(handle.clone(), n.policy(), n.ctx.clone(), shifted_release(), 1, None);
    let out = job.join().unwrap().unwrap();
    assert_eq!(out.label(), "corrected");
    let now = handle.load();
    assert_eq!(now.attempt(), 1);
    assert_eq!(now.gains.attempt, 1);
    assert_eq!(now.trajectory.release.t_rel, n.plan.trajectory.release.t_rel);
}

#[test]
fn readers_never_see_a_torn_plan() {
    let n = common::nominal();
    let handle = Arc::new(PlanHandle::new(n.plan.clone()));
    let stop = Arc::new(AtomicBool::new(false));
    let readers: Vec<_> = (0..4)
        .map(|_| {
            let (h, stop) = (handle.clone(), stop.clone());
            std::thread::spawn(move || {
                let mut last = 0;
                let mut reads = 0u64;
                while !stop.load(Ordering::Relaxed) || reads == 0 {
                    let p = h.load();
                    assert_eq!(p.trajectory.metadata.attempt, p.gains.attempt);
                    assert!(p.attempt() >= last, "attempt went backwards");
                    last = p.attempt();
                    reads += 1;
                }
                last
            })
        })
        .collect();
    for k in 1..=200u32 {
        let mut t = n.plan.trajectory.clone();
        let mut g = n.plan.gains.clone();
        t.metadata.attempt = k;
        g.attempt = k;
        handle.publish(Plan::new(t, g).unwrap());
    }
    stop.store(true, Ordering::Relaxed);
    for r in readers {
        assert!(r.join().unwrap() <= 200);
    }
    assert_eq!(handle.load().attempt(), 200);
}

#[test]
fn plan_pairs_must_match() {
    let n = common::nominal();
    let mut g = n.plan.gains.clone();
    g.attempt = 3;
    assert!(Plan::new(n.plan.trajectory.clone(), g).is_err());
    let back = Plan::from_json(&n.plan.to_json()).unwrap();
    assert_eq!(back.attempt(), 0);
    assert_eq!(back.gains, n.plan.gains);
}
