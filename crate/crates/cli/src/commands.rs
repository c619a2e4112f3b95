//! Subcommand bodies.

use std::fs;
use std::path::{Path, PathBuf};

use trapeze_core::control::{riccati_solve, CorrectionContext, GainSchedule, Plan};
use trapeze_core::dynamics::gripper_world;
use trapeze_core::planner::{plan_full, PlanRequest, SolveStatus, TrajectorySpline};
use trapeze_core::plot::{plan_paths, region_svg, trajectory_svg, Series};
use trapeze_core::sim::{
    integrate_hybrid, monte_carlo, sweep_release_region, ControllerMode, FailTag, ScenarioSpec, SimResult,
};

use crate::config::RunConfig;
use crate::CliError;

#[derive(Debug, Default)]
pub struct InputFiles {
    pub plan: Option<PathBuf>,
    pub gains: Option<PathBuf>,
}

pub fn mode(open_loop: bool, tc: Option<&str>) -> Option<ControllerMode> {
    match (open_loop, tc) {
        (true, _) => Some(ControllerMode::OpenLoop),
        (false, Some("0")) => Some(ControllerMode::PostureOnly),
        (false, Some(_)) => Some(ControllerMode::PostureCorrection),
        (false, None) => None,
    }
}

fn write(dir: &Path, name: &str, contents: &[u8]) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    println!("wrote {}", path.display());
    Ok(path)
}

fn context(cfg: &RunConfig) -> CorrectionContext {
    CorrectionContext {
        params: cfg.robot,
        target: cfg.target,
        solver: cfg.solver,
        riccati: cfg.riccati,
    }
}

fn solve_plan(cfg: &RunConfig) -> Result<TrajectorySpline, CliError> {
    let req = PlanRequest {
        x0: cfg.x0(),
        target: cfg.target,
        params: cfg.robot,
        grid: cfg.grid,
        solver: cfg.solver,
    };
    let out = plan_full(&req, None)?;
    if out.status == SolveStatus::Infeasible {
        return Err(CliError::Infeasible(format!(
            "offline problem, constraint violation {:.3e}",
            out.solution.max_violation
        )));
    }
    Ok(out.spline)
}

fn read_plan(cfg: &RunConfig, path: Option<&Path>) -> Result<TrajectorySpline, CliError> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Other(format!("{}: {e}", p.display())))?;
            Ok(TrajectorySpline::from_json(&text)?)
        }
        None => solve_plan(cfg),
    }
}

fn read_inputs(cfg: &RunConfig, files: &InputFiles) -> Result<Plan, CliError> {
    let spline = read_plan(cfg, files.plan.as_deref())?;
    let gains = match &files.gains {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Other(format!("{}: {e}", p.display())))?;
            GainSchedule::from_json(&text)?
        }
        None => riccati_solve(&spline, &cfg.robot, &cfg.riccati)?.schedule,
    };
    Ok(Plan::new(spline, gains)?)
}

pub fn plan(cfg: &RunConfig) -> Result<(), CliError> {
    let spline = solve_plan(cfg)?;
    let end = spline.end_time();
    let x = spline.state(end);
    let g = gripper_world(&cfg.robot, &spline.release, x[0], x[1], end);
    let miss = (g[0] - cfg.target.p0t[0]).hypot(g[1] - cfg.target.p0t[1]);
    let r = &spline.release;
    println!(
        "release t={:.4} s  alpha={:.4} beta={:.4} alpha_dot={:.4} beta_dot={:.4}",
        r.t_rel, r.x_rel[0], r.x_rel[1], r.x_rel[2], r.x_rel[3]
    );
    println!(
        "flight {:.4} s  cost {:.6}  terminal gripper error {:.3e} m  status {:?}",
        end - r.t_rel,
        spline.metadata.cost,
        miss,
        spline.metadata.status
    );
    write(&cfg.out, "plan.json", spline.to_json().as_bytes())?;
    let (hip, gripper) = plan_paths(&spline, &cfg.robot, 0.005);
    let svg = trajectory_svg(
        "planned motion",
        &[hip, gripper],
        cfg.target.p0t,
        cfg.sim.success_radius,
    );
    write(&cfg.out, "plan.svg", svg.as_bytes())?;
    Ok(())
}

pub fn gains(cfg: &RunConfig, plan: Option<&Path>) -> Result<(), CliError> {
    let spline = read_plan(cfg, plan)?;
    let sol = riccati_solve(&spline, &cfg.robot, &cfg.riccati)?;
    let h = &sol.health;
    println!(
        "riccati: {} samples, min eigenvalue {:.3e}, max asymmetry {:.3e}, max norm {:.3e}",
        h.samples, h.min_eigenvalue, h.max_asymmetry, h.max_norm
    );
    write(&cfg.out, "gains.json", sol.schedule.to_json().as_bytes())?;
    Ok(())
}

fn summary_json(result: &SimResult) -> String {
    let mut r = result.clone();
    r.log.clear();
    serde_json::to_string_pretty(&r).expect("result serializes")
}

pub fn simulate(
    cfg: &RunConfig,
    files: &InputFiles,
    mode: ControllerMode,
    scenario: Option<u64>,
) -> Result<(), CliError> {
    let plan = read_inputs(cfg, files)?;
    let (spec, tag) = match scenario {
        Some(seed) => (cfg.scenario_model().scenario(seed, mode), format!("seed{seed}")),
        None => (
            ScenarioSpec {
                seed: cfg.seed,
                ..ScenarioSpec::nominal(cfg.robot, mode)
            },
            "nominal".to_string(),
        ),
    };
    let mut sim = cfg.sim;
    sim.keep_log = true;
    let result = integrate_hybrid(&plan, &context(cfg), &cfg.correction, &spec, &sim)?;
    let stem = format!("simulate-{}-{tag}", mode.label());

    let mut w = csv::Writer::from_writer(Vec::new());
    for row in &result.log {
        w.serialize(row).map_err(|e| CliError::Other(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Other(e.to_string()))?;
    write(&cfg.out, &format!("{stem}.csv"), &bytes)?;
    write(&cfg.out, &format!("{stem}.json"), summary_json(&result).as_bytes())?;

    let (_, planned) = plan_paths(&plan.trajectory, &cfg.robot, 0.005);
    let planned = Series::new("planned gripper", planned.points);
    let actual = Series::new("simulated gripper", result.gripper_path());
    let svg = trajectory_svg(
        &format!("{} {tag}", mode.label()),
        &[planned, actual],
        cfg.target.p0t,
        sim.success_radius,
    );
    write(&cfg.out, &format!("{stem}.svg"), svg.as_bytes())?;

    println!(
        "{}: success={} min_dist={:.4} m psi_at_min={:.4} rad corrections={} fail={}",
        mode.label(),
        result.success,
        result.min_dist,
        result.psi_at_min,
        result.corrections,
        result.fail_tag.map(|t| t.label()).unwrap_or("-")
    );
    if result.fail_tag == Some(FailTag::Diverged) {
        return Err(CliError::Diverged(format!("scenario {tag}")));
    }
    Ok(())
}

pub fn montecarlo(cfg: &RunConfig, files: &InputFiles, only: Option<ControllerMode>) -> Result<(), CliError> {
    let plan = read_inputs(cfg, files)?;
    let modes: Vec<ControllerMode> = match only {
        Some(m) => vec![m],
        None => ControllerMode::ALL.to_vec(),
    };
    let report = monte_carlo(
        cfg.runs,
        &cfg.scenario_model(),
        &plan,
        &context(cfg),
        &cfg.correction,
        &cfg.sim,
        &modes,
        cfg.seed,
    )?;
    let stem = format!("montecarlo-seed{}-n{}", cfg.seed, cfg.runs);
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    write(&cfg.out, &format!("{stem}.csv"), &csv)?;
    write(&cfg.out, &format!("{stem}.json"), report.to_json().as_bytes())?;
    print!("{}", report.table());
    println!(
        "paired tc0 success -> tc1 failure: {} ({} more with a correction unavailable)",
        report.regressions, report.regressions_unavailable
    );
    Ok(())
}

pub fn sweep(cfg: &RunConfig, files: &InputFiles) -> Result<(), CliError> {
    let plan = read_inputs(cfg, files)?;
    let grid = sweep_release_region(&cfg.sweep, &plan, &context(cfg), &cfg.correction, &cfg.sim)?;
    let mut csv = Vec::new();
    grid.write_csv(&mut csv)?;
    write(&cfg.out, "sweep.csv", &csv)?;
    write(&cfg.out, "sweep.json", grid.to_json().as_bytes())?;
    write(
        &cfg.out,
        "sweep.svg",
        region_svg("landing region over release offsets", &grid).as_bytes(),
    )?;
    let fmt = |m: Option<f64>| m.map(|v| format!("{v:.2}")).unwrap_or_else(|| "none".into());
    println!(
        "cells {}: tc0 {} tc1 {} superset {} (violations {}), margin to boundary tc0 {} tc1 {} cells",
        grid.cells.len(),
        grid.tc0_count,
        grid.tc1_count,
        grid.is_superset(),
        grid.superset_violations,
        fmt(grid.tc0_margin),
        fmt(grid.tc1_margin)
    );
    Ok(())
}
