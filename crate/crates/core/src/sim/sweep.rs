//! Release-condition margin sweep.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::{CorrectionContext, CorrectionPolicy, Plan};
use crate::error::{Error, Result};

use super::{integrate_hybrid, ControllerMode, ScenarioSpec, SimConfig, SimResult};

/// Evenly spaced values from `min` to `max` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, steps: usize) -> Self {
        Self { min, max, steps }
    }

    pub fn validate(&self, name: &'static str) -> Result<()> {
        if self.steps < 2 {
            return Err(Error::invalid(name, "at least 2 steps"));
        }
        if !(self.min < self.max) || !self.min.is_finite() || !self.max.is_finite() {
            return Err(Error::invalid(name, "min must be below max"));
        }
        Ok(())
    }

    pub fn value(&self, i: usize) -> f64 {
        self.min + (self.max - self.min) * i as f64 / (self.steps - 1) as f64
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.steps).map(|i| self.value(i)).collect()
    }

    /// Parses `min:max:steps`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::invalid("grid", format!("expected min:max:steps, got `{s}`"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let min = parts[0].trim().parse().map_err(|_| bad())?;
        let max = parts[1].trim().parse().map_err(|_| bad())?;
        let steps = parts[2].trim().parse().map_err(|_| bad())?;
        Ok(Self { min, max, steps })
    }
}

/// Offsets applied to the planned release angle and rate of the trapeze
/// joint; the body joint is held at its planned release state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    pub d_alpha: Axis,
    pub d_alpha_dot: Axis,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            d_alpha: Axis::new(-0.05, 0.05, 21),
            d_alpha_dot: Axis::new(-0.2, 0.2, 21),
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.d_alpha.validate("sweep.d_alpha")?;
        self.d_alpha_dot.validate("sweep.d_alpha_dot")
    }

    /// Parses `a_min:a_max:steps,ad_min:ad_max:steps`.
    pub fn parse(s: &str) -> Result<Self> {
        let (a, ad) = s
            .split_once(',')
            .ok_or_else(|| Error::invalid("grid", "expected two comma-separated axes"))?;
        let spec = Self {
            d_alpha: Axis::parse(a)?,
            d_alpha_dot: Axis::parse(ad)?,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub i: usize,
    pub j: usize,
    pub d_alpha: f64,
    pub d_alpha_dot: f64,
    pub tc0: bool,
    pub tc1: bool,
    pub tc0_min_dist: f64,
    pub tc1_min_dist: f64,
    /// A correction attempt in the TC=1 run was infeasible or over budget.
    pub tc1_unavailable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub axes: [String; 2],
    pub spec: SweepSpec,
    /// Row-major over `d_alpha`, then `d_alpha_dot`.
    pub cells: Vec<SweepCell>,
    pub tc0_count: usize,
    pub tc1_count: usize,
    /// Cells where TC=0 lands and TC=1 does not with every correction available.
    pub superset_violations: usize,
    /// Distance in grid cells from the unperturbed release to the nearest
    /// failing cell, per setting. `None` when no cell fails.
    pub tc0_margin: Option<f64>,
    pub tc1_margin: Option<f64>,
}

impl SweepGrid {
    pub fn cell(&self, i: usize, j: usize) -> &SweepCell {
        &self.cells[i * self.spec.d_alpha_dot.steps + j]
    }

    pub fn is_superset(&self) -> bool {
        self.superset_violations == 0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweep serializes")
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Output(e.to_string());
        w.write_record([
            "d_alpha_rad",
            "d_alpha_dot_rad_s",
            "tc0",
            "tc1",
            "tc0_min_dist_m",
            "tc1_min_dist_m",
            "tc1_unavailable",
        ])
        .map_err(err)?;
        for c in &self.cells {
            w.write_record([
                format!("{:.6}", c.d_alpha),
                format!("{:.6}", c.d_alpha_dot),
                c.tc0.to_string(),
                c.tc1.to_string(),
                format!("{:.6}", c.tc0_min_dist),
                format!("{:.6}", c.tc1_min_dist),
                c.tc1_unavailable.to_string(),
            ])
            .map_err(err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Nearest failing cell to the unperturbed release, in grid units.
fn margin(spec: &SweepSpec, cells: &[SweepCell], ok: impl Fn(&SweepCell) -> bool) -> Option<f64> {
    let fi = |a: &Axis| -a.min / (a.max - a.min) * (a.steps - 1) as f64;
    let (ci, cj) = (fi(&spec.d_alpha), fi(&spec.d_alpha_dot));
    cells
        .iter()
        .filter(|c| !ok(c))
        .map(|c| ((c.i as f64 - ci).powi(2) + (c.j as f64 - cj).powi(2)).sqrt())
        .min_by(f64::total_cmp)
}

/// Simulates every grid cell from the planned release with TC=0 and TC=1.
pub fn sweep_release_region(
    spec: &SweepSpec,
    plan: &Plan,
    ctx: &CorrectionContext,
    policy: &CorrectionPolicy,
    cfg: &SimConfig,
) -> Result<SweepGrid> {
    spec.validate()?;
    let mut cfg = *cfg;
    cfg.keep_log = false;
    let (na, nd) = (spec.d_alpha.steps, spec.d_alpha_dot.steps);
    let run = |i: usize, j: usize, mode: ControllerMode| -> Result<SimResult> {
        let scenario = ScenarioSpec {
            release_perturbation: Some([spec.d_alpha.value(i), spec.d_alpha_dot.value(j)]),
            seed: (i * nd + j) as u64,
            ..ScenarioSpec::nominal(ctx.params, mode)
        };
        integrate_hybrid(plan, ctx, policy, &scenario, &cfg)
    };
    let cells = (0..na * nd)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / nd, k % nd);
            let a = run(i, j, ControllerMode::PostureOnly)?;
            let b = run(i, j, ControllerMode::PostureCorrection)?;
            Ok(SweepCell {
                i,
                j,
                d_alpha: spec.d_alpha.value(i),
                d_alpha_dot: spec.d_alpha_dot.value(j),
                tc0: a.success,
                tc1: b.success,
                tc0_min_dist: a.min_dist,
                tc1_min_dist: b.min_dist,
                tc1_unavailable: b.corrections_unavailable > 0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let tc0_count = cells.iter().filter(|c| c.tc0).count();
    let tc1_count = cells.iter().filter(|c| c.tc1).count();
    let superset_violations = cells.iter().filter(|c| c.tc0 && !c.tc1 && !c.tc1_unavailable).count();
    Ok(SweepGrid {
        axes: ["d_alpha_rad".into(), "d_alpha_dot_rad_s".into()],
        spec: *spec,
        tc0_margin: margin(spec, &cells, |c| c.tc0),
        tc1_margin: margin(spec, &cells, |c| c.tc1),
        cells,
        tc0_count,
        tc1_count,
        superset_violations,
    })
}
