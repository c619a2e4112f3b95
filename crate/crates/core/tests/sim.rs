mod common;

use trapeze_core::dynamics::{Phase, TargetSpec};
use trapeze_core::sim::{
    integrate_hybrid, monte_carlo, success_test, sweep_release_region, Axis, ControllerMode, FailTag, LogRow,
    ParamSpread, ScenarioModel, ScenarioSpec, SimConfig, SimResult, SweepSpec, UncertaintyModel,
};

fn simulate(spec: &ScenarioSpec, cfg: &SimConfig) -> SimResult {
    let n = common::nominal();
    integrate_hybrid(&n.plan, &n.ctx, &n.policy(), spec, cfg).unwrap()
}

fn scenarios() -> Vec<ScenarioSpec> {
    let model = ScenarioModel::default();
    let mut out: Vec<ScenarioSpec> = ControllerMode::ALL
        .iter()
        .map(|&m| ScenarioSpec::nominal(common::nominal().ctx.params, m))
        .collect();
    out.extend(
        [3, 4]
            .iter()
            .flat_map(|&seed| ControllerMode::ALL.map(|m| model.scenario(seed, m))),
    );
    out
}

#[test]
fn halving_the_step_keeps_nominal_outcomes() {
    let coarse = SimConfig::default();
    let fine = SimConfig { step: 0.5e-3, ..coarse };
    for spec in ControllerMode::ALL.map(|m| ScenarioSpec::nominal(common::nominal().ctx.params, m)) {
        let a = simulate(&spec, &coarse);
        let b = simulate(&spec, &fine);
        assert!(a.success && b.success, "{:?}", spec.mode);
        assert!((a.min_dist - b.min_dist).abs() < 5e-3);
    }
}

#[test]
fn flight_momentum_holds_on_every_log() {
    for spec in scenarios() {
        let r = simulate(&spec, &SimConfig::default());
        let flight: Vec<&LogRow> = r.log.iter().filter(|row| row.phase == Phase::Flight.index()).collect();
        assert!(flight.len() > 100);
        let p0 = flight[0].momentum;
        for row in &flight {
            let drift = (row.momentum - p0).abs() / p0.abs().max(1.0);
            assert!(
                drift < 1e-6,
                "{:?} seed {} t {}: {drift:e}",
                spec.mode,
                spec.seed,
                row.t
            );
        }
    }
}

#[test]
fn success_flag_agrees_with_the_log() {
    let n = common::nominal();
    for spec in scenarios() {
        let r = simulate(&spec, &SimConfig::default());
        let v = success_test(&r.log, &n.ctx.target, 0.05);
        assert_eq!(v.success, r.success);
        assert_eq!(v.fail_tag, r.fail_tag);
        assert_eq!(v.min_dist, r.min_dist);
    }
}

#[test]
fn release_at_the_end_has_no_flight() {
    let n = common::nominal();
    let s = &n.plan.trajectory;
    let spec = ScenarioSpec {
        release_jitter: s.end_time() - s.t_rel,
        ..ScenarioSpec::nominal(n.ctx.params, ControllerMode::PostureCorrection)
    };
    let r = simulate(&spec, &SimConfig::default());
    assert_eq!(r.fail_tag, Some(FailTag::NoFlight));
    assert!(!r.success);
    assert_eq!(r.estimator_reads, 0);
}

#[test]
fn same_seed_same_result() {
    let model = ScenarioModel::default();
    let spec = model.scenario(17, ControllerMode::PostureCorrection);
    assert_eq!(spec, model.scenario(17, ControllerMode::PostureCorrection));
    let a = simulate(&spec, &SimConfig::default());
    let b = simulate(&spec, &SimConfig::default());
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn paired_scenarios_share_plant_and_noise() {
    let model = ScenarioModel::default();
    let a = model.scenario(5, ControllerMode::OpenLoop);
    let b = model.scenario(5, ControllerMode::PostureCorrection);
    assert_eq!(
        (a.params, a.initial_perturbation, a.release_jitter),
        (b.params, b.initial_perturbation, b.release_jitter)
    );
    assert!(a.initial_perturbation.iter().all(|p| p.abs() <= 0.01));
    assert!(a.release_jitter.abs() <= 0.025);
}

fn row(dist: f64, psi: f64, phase: Phase) -> LogRow {
    LogRow {
        t: 0.0,
        phase: phase.index(),
        alpha: 0.0,
        beta: 0.0,
        alpha_dot: 0.0,
        beta_dot: 0.0,
        u: 0.0,
        saturated: false,
        gripper_x: 0.0,
        gripper_y: 0.0,
        dist,
        psi,
        momentum: 0.0,
        plan_attempt: 0,
    }
}

#[test]
fn landing_predicate_examples() {
    let target = TargetSpec::default();
    let pass = success_test(
        &[row(0.1, 0.0, Phase::Flight), row(0.04, -0.2, Phase::Flight)],
        &target,
        0.05,
    );
    assert!(pass.success);
    assert_eq!(pass.fail_tag, None);

    let bad = success_test(
        &[row(0.04, 1.0, Phase::Flight), row(0.03, -1.0, Phase::Flight)],
        &target,
        0.05,
    );
    assert!(!bad.success);
    assert_eq!(bad.fail_tag, Some(FailTag::BadApproach));
    assert_eq!(bad.min_dist, 0.03);

    let miss = success_test(
        &[row(0.06, 0.0, Phase::Flight), row(0.01, 0.0, Phase::Swing)],
        &target,
        0.05,
    );
    assert_eq!(miss.fail_tag, Some(FailTag::Miss));
    assert_eq!(miss.min_dist, 0.06);
}

#[test]
fn certain_plant_monte_carlo_lands() {
    let n = common::nominal();
    let model = ScenarioModel {
        uncertainty: UncertaintyModel {
            spread: ParamSpread::zero(),
            ..UncertaintyModel::default()
        },
        initial_noise: 0.0,
        release_jitter: 0.0,
    };
    let cfg = SimConfig {
        measurement_noise: 0.0,
        ..SimConfig::default()
    };
    let report = monte_carlo(
        1,
        &model,
        &n.plan,
        &n.ctx,
        &n.policy(),
        &cfg,
        &[ControllerMode::PostureOnly],
        9,
    )
    .unwrap();
    assert_eq!(report.summaries.len(), 1);
    assert_eq!(report.summaries[0].successes, 1);
}

#[test]
fn monte_carlo_is_reproducible() {
    let n = common::nominal();
    let run = || {
        let r = monte_carlo(
            6,
            &ScenarioModel::default(),
            &n.plan,
            &n.ctx,
            &n.policy(),
            &SimConfig::default(),
            &ControllerMode::ALL,
            40,
        )
        .unwrap();
        let mut csv = Vec::new();
        r.write_csv(&mut csv).unwrap();
        (r, String::from_utf8(csv).unwrap())
    };
    let (a, csv_a) = run();
    let (b, csv_b) = run();
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(csv_a, csv_b);
    assert!(csv_a.starts_with("seed,config,success,min_dist_m,psi_at_min_rad,corrections,fail_tag\n"));
    assert_eq!(csv_a.lines().count(), 1 + 18);
    for s in &a.summaries {
        assert_eq!(s.successes + s.failures, 6);
        assert_eq!(s.failures, s.miss + s.bad_approach + s.diverged + s.no_flight);
    }
}

#[test]
fn small_sweep_contains_the_nominal_release() {
    let n = common::nominal();
    let spec = SweepSpec {
        d_alpha: Axis::new(-0.01, 0.01, 3),
        d_alpha_dot: Axis::new(-0.04, 0.04, 3),
    };
    let grid = sweep_release_region(&spec, &n.plan, &n.ctx, &n.policy(), &SimConfig::default()).unwrap();
    assert_eq!(grid.cells.len(), 9);
    let centre = grid.cell(1, 1);
    assert_eq!((centre.d_alpha, centre.d_alpha_dot), (0.0, 0.0));
    assert!(centre.tc0 && centre.tc1);
    assert!(grid.tc1_count >= grid.tc0_count);
    let mut csv = Vec::new();
    grid.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 10);
}

#[test]
fn grid_flag_parses() {
    let spec = SweepSpec::parse("-0.1:0.1:5,-1:1:7").unwrap();
    assert_eq!(spec.d_alpha, Axis::new(-0.1, 0.1, 5));
    assert_eq!(spec.d_alpha_dot.values().len(), 7);
    assert!(SweepSpec::parse("-0.1:0.1,-1:1:7").is_err());
    assert!(SweepSpec::parse("0.1:-0.1:5,-1:1:7").is_err());
    assert!(SweepSpec::parse("-0.1:0.1:1,-1:1:7").is_err());
}
