//! Acceptance criteria, one verdict line each. Runs as a plain binary.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{Matrix2, Matrix4, RowVector4, Vector2, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trapeze_core::control::{integrate_backward, riccati_solve, Interval, RiccatiConfig};
use trapeze_core::dynamics::{attack_angle, gripper_world, rk4_step, Phase, PhaseParams, RobotParams, State};
use trapeze_core::planner::{plan_full, window_knots};
use trapeze_core::sim::{
    integrate_hybrid, monte_carlo, sweep_release_region, ControllerMode, ScenarioModel, ScenarioSpec, SimConfig,
    SweepSpec,
};

struct Verdict {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn random_state(rng: &mut ChaCha8Rng) -> (State, f64) {
    let x = State::new(
        rng.random_range(-3.1..3.1),
        rng.random_range(-1.5..1.5),
        rng.random_range(-5.0..5.0),
        rng.random_range(-5.0..5.0),
    );
    (x, rng.random_range(-10.0..10.0))
}

fn dynamics_oracles() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (mut jac, mut skew) = (0.0f64, 0.0f64);
    let mut gravity_zero = true;
    for phase in [Phase::Swing, Phase::Flight] {
        let m = PhaseParams::new(&RobotParams::default(), phase);
        for _ in 0..100 {
            let (x, u) = random_state(&mut rng);
            let (a, b) = m.linearize(&x, u).unwrap();
            let (afd, bfd) = m.linearize_fd(&x, u, 1e-6).unwrap();
            jac = jac
                .max((a - afd).norm() / afd.norm().max(1.0))
                .max((b - bfd).norm() / bfd.norm().max(1.0));
            let (q, qd) = (Vector2::new(x[0], x[1]), Vector2::new(x[2], x[3]));
            let h = 1e-6;
            let mdot: Matrix2<f64> = (m.mass_matrix(&(q + qd * h)) - m.mass_matrix(&(q - qd * h))) / (2.0 * h);
            let n = mdot - 2.0 * m.coriolis_matrix(&q, &qd);
            skew = skew.max((n + n.transpose()).abs().max());
            if phase == Phase::Flight {
                gravity_zero &= m.gravity_vector(&q) == Vector2::zeros();
            }
        }
    }
    check(
        jac < 1e-5 && skew < 1e-8 && gravity_zero,
        format!("jacobian rel err {jac:.1e}, skew {skew:.1e}, flight gravity zero {gravity_zero}"),
    )
}

fn conservation() -> Verdict {
    let dt = 1e-3;
    let flight = PhaseParams::new(&RobotParams::default(), Phase::Flight);
    let mut momentum = 0.0f64;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut x, _) = random_state(&mut rng);
        let p0 = flight.momentum_alpha(&x);
        for k in 0..1000 {
            let u: f64 = rng.random_range(-20.0..20.0);
            x = rk4_step(&flight, &x, k as f64 * dt, dt, |_| u).unwrap();
        }
        momentum = momentum.max((flight.momentum_alpha(&x) - p0).abs() / p0.abs().max(1.0));
    }
    let undamped = RobotParams {
        sigma_alpha: 0.0,
        sigma_beta: 0.0,
        ..RobotParams::default()
    };
    let swing = PhaseParams::new(&undamped, Phase::Swing);
    let mut energy = 0.0f64;
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let mut x = State::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.0, 0.0);
        let e0 = swing.energy(&x);
        for k in 0..1000 {
            x = rk4_step(&swing, &x, k as f64 * dt, dt, |_| 0.0).unwrap();
        }
        energy = energy.max((swing.energy(&x) - e0).abs() / e0.abs().max(1.0));
    }
    check(
        momentum < 1e-6 && energy < 1e-6,
        format!("flight momentum drift {momentum:.1e}, swing energy drift {energy:.1e}"),
    )
}

fn collocation() -> Verdict {
    let n = common::nominal();
    let s = &n.outcome.spline;
    let err = (common::reintegrate(s, &n.request.params) - s.state(s.end_time())).norm();
    let order = common::defect_order(&[8, 16, 32, 64]);
    check(
        err < 1e-3 && (order - 4.0).abs() <= 0.5,
        format!("re-integration error {err:.1e}, defect order {order:.2}"),
    )
}

fn nominal_plan() -> Verdict {
    let started = Instant::now();
    let req = common::request();
    let out = match plan_full(&req, None) {
        Ok(o) => o,
        Err(e) => return check(false, format!("planner error: {e}")),
    };
    let elapsed = started.elapsed().as_secs_f64();
    let s = &out.spline;
    let end = s.end_time();
    let x = s.state(end);
    let g = gripper_world(&req.params, &s.release, x[0], x[1], end);
    let miss = (g - Vector2::from(req.target.p0t)).norm();
    let mut band = true;
    let knots = window_knots(req.grid.n_flight, &req.target);
    for &j in &knots {
        let t = s.t_rel + (end - s.t_rel) * j as f64 / req.grid.n_flight as f64;
        let psi =
            attack_angle(&req.params, &s.release, &s.state(t), t, &req.target).unwrap() + s.metadata.approach_offset;
        band &= psi >= req.target.gamma_min - 1e-6 && psi <= req.target.gamma_max + 1e-6;
    }
    let r = &s.release;
    println!(
        "      release t={:.4} alpha={:.3} beta={:.3} alpha_dot={:.4} beta_dot={:.3} (reference t=1.0204 alpha=2.834 beta=0.390 alpha_dot=1.7816 beta_dot=6.139)",
        r.t_rel, r.x_rel[0], r.x_rel[1], r.x_rel[2], r.x_rel[3]
    );
    check(
        out.status.is_feasible() && miss < 1e-4 && band && !knots.is_empty() && elapsed < 60.0,
        format!(
            "status {:?}, terminal error {miss:.1e} m, band held at {} knots, {elapsed:.2} s",
            out.status,
            knots.len()
        ),
    )
}

fn hanging_equilibrium() -> (Matrix4<f64>, Vector4<f64>) {
    let sw = PhaseParams::new(&RobotParams::default(), Phase::Swing);
    let t = sw.theta;
    let a = (-t[4]).atan2(t[5]);
    let a = if a.sin() > 0.0 { a } else { a + std::f64::consts::PI };
    let x = State::new(a - sw.kappa1, std::f64::consts::FRAC_PI_2 - a, 0.0, 0.0);
    sw.linearize(&x, 0.0).unwrap()
}

fn dare(a: &Matrix4<f64>, b: &Vector4<f64>, q: &Matrix4<f64>, r: f64, dt: f64) -> Matrix4<f64> {
    let ad = Matrix4::identity() + a * dt;
    let bd = b * dt;
    let (qd, rd) = (q * dt, r * dt);
    let mut p = *q;
    loop {
        let pb = p * bd;
        let next =
            qd + ad.transpose() * p * ad - ad.transpose() * pb * pb.transpose() * ad / (rd + (bd.transpose() * pb)[0]);
        let next = (next + next.transpose()) * 0.5;
        if (next - p).amax() < 1e-13 * p.amax().max(1.0) {
            return next;
        }
        p = next;
    }
}

fn care_error() -> f64 {
    let (a, b) = hanging_equilibrium();
    let cfg = RiccatiConfig::default();
    let q = Matrix4::from_fn(|i, j| cfg.q[i][j]);
    let (p1, p2, p3) = (
        dare(&a, &b, &q, cfg.r, 1e-4),
        dare(&a, &b, &q, cfg.r, 5e-5),
        dare(&a, &b, &q, cfg.r, 2.5e-5),
    );
    let (r1, r2) = (p2 * 2.0 - p1, p3 * 2.0 - p2);
    let k_care = b.transpose() * ((r2 * 4.0 - r1) / 3.0) / cfg.r;
    let interval = Interval {
        start: 0.0,
        end: 40.0,
        linearize: Box::new(move |_t| Ok((a, b))),
    };
    let sol = integrate_backward(&[interval], &cfg, 0).unwrap();
    (RowVector4::from(sol.schedule.gains[0]) - k_care).amax() / k_care.amax()
}

fn tvlqr() -> Verdict {
    let n = common::nominal();
    let h = &n.riccati.health;
    let psd = h.min_eigenvalue > 0.0 && h.max_asymmetry < 1e-9;
    let g = &n.riccati.schedule;
    let k = g.gain(g.t_rel);
    let jump = (g.gain(g.t_rel - 1e-8) - k)
        .norm()
        .max((g.gain(g.t_rel + 1e-8) - k).norm())
        / k.norm().max(1.0);
    let care = care_error();
    let mut worst = 0.0f64;
    for p in [[0.01, 0.01], [0.01, -0.01], [-0.01, 0.01], [-0.01, -0.01]] {
        let spec = ScenarioSpec {
            initial_perturbation: p,
            ..ScenarioSpec::nominal(n.ctx.params, ControllerMode::PostureOnly)
        };
        let r = integrate_hybrid(&n.plan, &n.ctx, &n.policy(), &spec, &SimConfig::default()).unwrap();
        worst = worst.max(r.min_dist);
    }
    check(
        psd && jump < 1e-3 && care < 1e-4 && worst <= 0.05,
        format!(
            "min eig {:.1e}, asymmetry {:.1e}, relative gain jump at release {jump:.1e}, algebraic oracle err {care:.1e}, worst perturbed min dist {:.2} cm",
            h.min_eigenvalue,
            h.max_asymmetry,
            worst * 100.0
        ),
    )
}

fn correction() -> Verdict {
    let n = common::nominal();
    let policy = n.policy();
    let run = |mode| {
        let spec = ScenarioSpec {
            release_jitter: 0.02,
            ..ScenarioSpec::nominal(n.ctx.params, mode)
        };
        integrate_hybrid(&n.plan, &n.ctx, &policy, &spec, &SimConfig::default()).unwrap()
    };
    let (tc0, tc1) = (run(ControllerMode::PostureOnly), run(ControllerMode::PostureCorrection));
    let slowest = tc1.events.iter().map(|e| e.elapsed).fold(0.0, f64::max);
    check(
        tc0.min_dist > 0.05 && tc1.min_dist <= 0.05 && tc1.corrections >= 1 && slowest < policy.budget,
        format!(
            "tc0 min dist {:.2} cm, tc1 min dist {:.2} cm after {} corrections, slowest {:.3} s",
            tc0.min_dist * 100.0,
            tc1.min_dist * 100.0,
            tc1.corrections,
            slowest
        ),
    )
}

fn monte_carlo_ordering() -> Verdict {
    let n = common::nominal();
    let started = Instant::now();
    let report = monte_carlo(
        300,
        &ScenarioModel::default(),
        &n.plan,
        &n.ctx,
        &n.policy(),
        &SimConfig::default(),
        &ControllerMode::ALL,
        1,
    )
    .unwrap();
    let rate = |m| report.rate(m).unwrap();
    let (ol, tc0, tc1) = (
        rate(ControllerMode::OpenLoop),
        rate(ControllerMode::PostureOnly),
        rate(ControllerMode::PostureCorrection),
    );
    let elapsed = started.elapsed().as_secs_f64();
    check(
        ol < tc0 && tc0 < tc1 && ol < 0.10 && tc1 > 0.70 && elapsed < 900.0,
        format!(
            "open-loop {:.2}%, tc0 {:.2}%, tc1 {:.2}%, {elapsed:.1} s",
            ol * 100.0,
            tc0 * 100.0,
            tc1 * 100.0
        ),
    )
}

fn sweep() -> Verdict {
    let n = common::nominal();
    let started = Instant::now();
    let grid = sweep_release_region(
        &SweepSpec::default(),
        &n.plan,
        &n.ctx,
        &n.policy(),
        &SimConfig::default(),
    )
    .unwrap();
    let elapsed = started.elapsed().as_secs_f64();
    let unavailable = grid
        .cells
        .iter()
        .filter(|c| c.tc0 && !c.tc1 && c.tc1_unavailable)
        .count();
    check(
        grid.cells.len() == 441 && grid.is_superset() && grid.tc1_count > grid.tc0_count && elapsed < 1800.0,
        format!(
            "tc0 {} cells, tc1 {} cells, violations {}, excused by unavailable correction {unavailable}, {elapsed:.1} s",
            grid.tc0_count, grid.tc1_count, grid.superset_violations
        ),
    )
}

fn determinism() -> Verdict {
    let outputs = || {
        let req = common::request();
        let spline = plan_full(&req, None).unwrap().spline;
        let gains = riccati_solve(&spline, &req.params, &RiccatiConfig::default())
            .unwrap()
            .schedule;
        let n = common::nominal();
        let cfg = SimConfig::default();
        let mc = monte_carlo(
            20,
            &ScenarioModel::default(),
            &n.plan,
            &n.ctx,
            &n.policy(),
            &cfg,
            &ControllerMode::ALL,
            7,
        )
        .unwrap();
        let mut mc_csv = Vec::new();
        mc.write_csv(&mut mc_csv).unwrap();
        let spec = SweepSpec::parse("-0.02:0.02:3,-0.1:0.1:3").unwrap();
        let grid = sweep_release_region(&spec, &n.plan, &n.ctx, &n.policy(), &cfg).unwrap();
        let mut sweep_csv = Vec::new();
        grid.write_csv(&mut sweep_csv).unwrap();
        let sim = integrate_hybrid(
            &n.plan,
            &n.ctx,
            &n.policy(),
            &ScenarioModel::default().scenario(3, ControllerMode::PostureCorrection),
            &cfg,
        )
        .unwrap();
        vec![
            spline.to_json().into_bytes(),
            gains.to_json().into_bytes(),
            mc.to_json().into_bytes(),
            mc_csv,
            grid.to_json().into_bytes(),
            sweep_csv,
            serde_json::to_vec(&sim).unwrap(),
        ]
    };
    let (a, b) = (outputs(), outputs());
    let same = a.iter().zip(&b).filter(|(x, y)| x == y).count();
    check(
        same == a.len(),
        format!("{same}/{} outputs byte-identical across repeated runs", a.len()),
    )
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("dynamics oracles", dynamics_oracles),
        ("conservation", conservation),
        ("collocation consistency", collocation),
        ("nominal plan", nominal_plan),
        ("tvlqr", tvlqr),
        ("correction efficacy", correction),
        ("monte carlo ordering", monte_carlo_ordering),
        ("release sweep", sweep),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let v = run();
        println!(
            "{} [{}] {name}: {} ({:.1} s)",
            if v.pass { "PASS" } else { "FAIL" },
            i + 1,
            v.detail,
            started.elapsed().as_secs_f64()
        );
        failed += usize::from(!v.pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
