//! Paired-seed Monte Carlo over uncertain plants.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::{CorrectionContext, CorrectionPolicy, Plan};
use crate::error::{Error, Result};

use super::{integrate_hybrid, sample_params, ControllerMode, ScenarioSpec, SimConfig, SimResult, UncertaintyModel};

/// How each scenario is drawn from its seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioModel {
    pub uncertainty: UncertaintyModel,
    /// Largest initial joint-angle offset, drawn uniformly per joint (rad).
    pub initial_noise: f64,
    /// Largest release-time offset, drawn uniformly (s).
    pub release_jitter: f64,
}

impl Default for ScenarioModel {
    fn default() -> Self {
        Self {
            uncertainty: UncertaintyModel::default(),
            initial_noise: 0.01,
            release_jitter: 0.025,
        }
    }
}

impl ScenarioModel {
    pub fn validate(&self) -> Result<()> {
        self.uncertainty.validate()?;
        if !(self.initial_noise >= 0.0) {
            return Err(Error::invalid("scenario.initial_noise", "must be non-negative"));
        }
        if !(self.release_jitter >= 0.0) {
            return Err(Error::invalid("scenario.release_jitter", "must be non-negative"));
        }
        Ok(())
    }

    /// The scenario for `seed`. Every mode sees the same plant, noise and jitter.
    pub fn scenario(&self, seed: u64, mode: ControllerMode) -> ScenarioSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = sample_params(&self.uncertainty, &mut rng);
        let mut symmetric = |a: f64| if a > 0.0 { rng.random_range(-a..=a) } else { 0.0 };
        let initial_perturbation = [symmetric(self.initial_noise), symmetric(self.initial_noise)];
        let release_jitter = symmetric(self.release_jitter);
        ScenarioSpec {
            params,
            initial_perturbation,
            release_jitter,
            release_perturbation: None,
            mode,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub mode: ControllerMode,
    pub runs: usize,
    pub successes: usize,
    pub failures: usize,
    pub rate: f64,
    pub miss: usize,
    pub bad_approach: usize,
    pub diverged: usize,
    pub no_flight: usize,
    /// Scenarios where some correction attempt was infeasible or over budget.
    pub correction_unavailable: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub n: usize,
    pub base_seed: u64,
    pub summaries: Vec<ModeSummary>,
    /// Paired seeds where TC=0 landed and TC=1 did not, split by whether a
    /// correction was unavailable in that run.
    pub regressions: usize,
    pub regressions_unavailable: usize,
    #[serde(skip)]
    pub results: Vec<SimResult>,
}

impl MonteCarloReport {
    pub fn summary(&self, mode: ControllerMode) -> Option<&ModeSummary> {
        self.summaries.iter().find(|s| s.mode == mode)
    }

    pub fn rate(&self, mode: ControllerMode) -> Option<f64> {
        self.summary(mode).map(|s| s.rate)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_scenario_csv(&self.results, out)
    }

    /// Plain-text table, one row per mode.
    pub fn table(&self) -> String {
        let mut s = format!("{:<10} {:>6} {:>8} {:>8}\n", "config", "runs", "success", "rate");
        for m in &self.summaries {
            s.push_str(&format!(
                "{:<10} {:>6} {:>8} {:>7.2}%\n",
                m.mode.label(),
                m.runs,
                m.successes,
                100.0 * m.rate
            ));
        }
        s
    }
}

/// One CSV row per scenario with the columns
/// `seed,config,success,min_dist_m,psi_at_min_rad,corrections,fail_tag`.
pub fn write_scenario_csv<W: Write>(results: &[SimResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "seed",
        "config",
        "success",
        "min_dist_m",
        "psi_at_min_rad",
        "corrections",
        "fail_tag",
    ])
    .map_err(csv_error)?;
    for r in results {
        w.write_record([
            r.seed.to_string(),
            r.mode.label().to_string(),
            r.success.to_string(),
            format!("{:.6}", r.min_dist),
            format!("{:.6}", r.psi_at_min),
            r.corrections.to_string(),
            r.fail_tag.map(|t| t.label()).unwrap_or("").to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Output(e.to_string())
}

/// Runs `n` scenarios per mode on seeds `base_seed..base_seed + n`.
#[allow(clippy::too_many_arguments)]
pub fn monte_carlo(
    n: usize,
    model: &ScenarioModel,
    plan: &Plan,
    ctx: &CorrectionContext,
    policy: &CorrectionPolicy,
    cfg: &SimConfig,
    modes: &[ControllerMode],
    base_seed: u64,
) -> Result<MonteCarloReport> {
    model.validate()?;
    let mut cfg = *cfg;
    cfg.keep_log = false;
    let jobs: Vec<(usize, ControllerMode)> = modes.iter().flat_map(|&m| (0..n).map(move |i| (i, m))).collect();
    let results = jobs
        .par_iter()
        .map(|&(i, mode)| {
            let seed = base_seed.wrapping_add(i as u64);
            integrate_hybrid(plan, ctx, policy, &model.scenario(seed, mode), &cfg)
        })
        .collect::<Result<Vec<_>>>()?;

    let summaries = modes
        .iter()
        .map(|&mode| {
            let runs: Vec<&SimResult> = results.iter().filter(|r| r.mode == mode).collect();
            let count = |f: &dyn Fn(&SimResult) -> bool| runs.iter().filter(|r| f(r)).count();
            let successes = count(&|r| r.success);
            ModeSummary {
                mode,
                runs: runs.len(),
                successes,
                failures: runs.len() - successes,
                rate: if runs.is_empty() {
                    0.0
                } else {
                    successes as f64 / runs.len() as f64
                },
                miss: count(&|r| r.fail_tag == Some(super::FailTag::Miss)),
                bad_approach: count(&|r| r.fail_tag == Some(super::FailTag::BadApproach)),
                diverged: count(&|r| r.fail_tag == Some(super::FailTag::Diverged)),
                no_flight: count(&|r| r.fail_tag == Some(super::FailTag::NoFlight)),
                correction_unavailable: count(&|r| r.corrections_unavailable > 0),
            }
        })
        .collect();

    let (mut regressions, mut regressions_unavailable) = (0, 0);
    let by_mode = |mode| results.iter().filter(move |r: &&SimResult| r.mode == mode);
    for (a, b) in by_mode(ControllerMode::PostureOnly).zip(by_mode(ControllerMode::PostureCorrection)) {
        if a.success && !b.success {
            if b.corrections_unavailable > 0 {
                regressions_unavailable += 1;
            } else {
                regressions += 1;
            }
        }
    }

    Ok(MonteCarloReport {
        n,
        base_seed,
        summaries,
        regressions,
        regressions_unavailable,
        results,
    })
}
