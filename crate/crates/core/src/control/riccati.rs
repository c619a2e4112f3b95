//! Backward Riccati integration along a reference and the resulting gain schedule.

use nalgebra::{Matrix4, RowVector4, Vector4};
use serde::{Deserialize, Serialize};

use crate::dynamics::{Phase, PhaseParams, RobotParams};
use crate::error::{Error, Result};
use crate::planner::TrajectorySpline;

pub const GAIN_FORMAT: &str = "trapeze-gains/1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RiccatiConfig {
    pub q: [[f64; 4]; 4],
    pub r: f64,
    pub s_final: [[f64; 4]; 4],
    /// Output sample spacing (s).
    pub step: f64,
    /// Output samples are added inside a step while the gain changes by
    /// more than this fraction of its size across it.
    pub gain_resolution: f64,
    /// Shortest output spacing the refinement may reach (s).
    pub min_step: f64,
    /// Largest admissible `|S|` before the pass is declared divergent.
    pub blow_up: f64,
}

fn diag(d: [f64; 4]) -> [[f64; 4]; 4] {
    let mut m = [[0.0; 4]; 4];
    for i in 0..4 {
        m[i][i] = d[i];
    }
    m
}

pub(crate) fn to_matrix(m: &[[f64; 4]; 4]) -> Matrix4<f64> {
    Matrix4::from_fn(|r, c| m[r][c])
}

impl Default for RiccatiConfig {
    fn default() -> Self {
        Self {
            q: diag([4.0, 2.0, 2.0, 2.0]),
            r: 0.3,
            s_final: diag([100.0, 100.0, 10.0, 10.0]),
            step: 1e-3,
            gain_resolution: 0.05,
            min_step: 1e-7,
            blow_up: 1e12,
        }
    }
}

impl RiccatiConfig {
    pub fn validate(&self) -> Result<()> {
        let q = to_matrix(&self.q);
        let s = to_matrix(&self.s_final);
        for (name, m) in [("q", q), ("s_final", s)] {
            if (m - m.transpose()).amax() > 1e-12 {
                return Err(Error::invalid("riccati", format!("{name} must be symmetric")));
            }
            if m.symmetric_eigenvalues().min() < -1e-12 {
                return Err(Error::invalid(
                    "riccati",
                    format!("{name} must be positive semidefinite"),
                ));
            }
        }
        if !(self.gain_resolution > 0.0 && self.min_step > 0.0 && self.min_step <= self.step) {
            return Err(Error::invalid(
                "riccati",
                "gain_resolution and min_step must be positive, min_step at most step",
            ));
        }
        if !(self.r > 0.0) {
            return Err(Error::invalid("riccati", "r must be positive"));
        }
        if !(self.step > 0.0) {
            return Err(Error::invalid("riccati", "step must be positive"));
        }
        Ok(())
    }
}

/// Piecewise-linear feedback gain `K(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainSchedule {
    pub format: String,
    pub breakpoints: Vec<f64>,
    pub gains: Vec<[f64; 4]>,
    pub t_rel: f64,
    /// Correction attempt the gains were synthesized for.
    pub attempt: u32,
}

impl GainSchedule {
    pub fn start_time(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn end_time(&self) -> f64 {
        *self.breakpoints.last().expect("non-empty schedule")
    }

    /// Gain at `t`, clamped to the covered interval.
    pub fn gain(&self, t: f64) -> RowVector4<f64> {
        let b = &self.breakpoints;
        if t <= b[0] {
            return RowVector4::from(self.gains[0]);
        }
        if t >= self.end_time() {
            return RowVector4::from(*self.gains.last().expect("non-empty schedule"));
        }
        let k = b.partition_point(|&x| x <= t) - 1;
        let w = (t - b[k]) / (b[k + 1] - b[k]);
        let (g0, g1) = (RowVector4::from(self.gains[k]), RowVector4::from(self.gains[k + 1]));
        g0 + (g1 - g0) * w
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("gains serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let g: Self = serde_json::from_str(s).map_err(|e| Error::MalformedTrajectory(e.to_string()))?;
        if g.format != GAIN_FORMAT || g.breakpoints.len() != g.gains.len() || g.breakpoints.len() < 2 {
            return Err(Error::MalformedTrajectory("inconsistent gain schedule".into()));
        }
        if g.breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::MalformedTrajectory("gain breakpoints must increase".into()));
        }
        Ok(g)
    }
}

/// Cost-to-go diagnostics over a backward pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiccatiHealth {
    pub min_eigenvalue: f64,
    pub max_asymmetry: f64,
    pub max_norm: f64,
    pub samples: usize,
}

#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub schedule: GainSchedule,
    /// Cost-to-go at each schedule breakpoint.
    pub cost_to_go: Vec<Matrix4<f64>>,
    pub health: RiccatiHealth,
}

/// One time interval with a single linearization model.
pub struct Interval<'a> {
    pub start: f64,
    pub end: f64,
    pub linearize: Linearization<'a>,
}

fn riccati_rate(s: &Matrix4<f64>, a: &Matrix4<f64>, b: &Vector4<f64>, q: &Matrix4<f64>, r_inv: f64) -> Matrix4<f64> {
    // dS/d(tau) for tau = T - t
    let sb = s * b;
    q - sb * sb.transpose() * r_inv + s * a + a.transpose() * s
}

type Linearization<'a> = Box<dyn Fn(f64) -> Result<(Matrix4<f64>, Vector4<f64>)> + 'a>;

fn rk4(
    lin: &Linearization<'_>,
    s: &Matrix4<f64>,
    t: f64,
    dt: f64,
    q: &Matrix4<f64>,
    r_inv: f64,
) -> Result<Matrix4<f64>> {
    let (a1, b1) = lin(t)?;
    let (am, bm) = lin(t - 0.5 * dt)?;
    let (a2, b2) = lin(t - dt)?;
    let k1 = riccati_rate(s, &a1, &b1, q, r_inv);
    let k2 = riccati_rate(&(s + k1 * (0.5 * dt)), &am, &bm, q, r_inv);
    let k3 = riccati_rate(&(s + k2 * (0.5 * dt)), &am, &bm, q, r_inv);
    let k4 = riccati_rate(&(s + k3 * dt), &a2, &b2, q, r_inv);
    Ok(s + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

const SUBSTEP_TOL: f64 = 1e-10;
const MAX_HALVINGS: u32 = 24;

/// One backward step from `t` to `t - dt`, halved until a full step and two
/// half steps agree.
fn advance(
    lin: &Linearization<'_>,
    s: &Matrix4<f64>,
    t: f64,
    dt: f64,
    q: &Matrix4<f64>,
    r_inv: f64,
    depth: u32,
) -> Result<Matrix4<f64>> {
    let full = rk4(lin, s, t, dt, q, r_inv)?;
    let mid = rk4(lin, s, t, 0.5 * dt, q, r_inv)?;
    let half = rk4(lin, &mid, t - 0.5 * dt, 0.5 * dt, q, r_inv)?;
    let err = (full - half).amax() / (1.0 + half.amax());
    if (err.is_finite() && err < SUBSTEP_TOL) || depth >= MAX_HALVINGS {
        return Ok(half);
    }
    let mid = advance(lin, s, t, 0.5 * dt, q, r_inv, depth + 1)?;
    advance(lin, &mid, t - 0.5 * dt, 0.5 * dt, q, r_inv, depth + 1)
}

struct Refine<'a, 'b> {
    lin: &'a Linearization<'b>,
    q: &'a Matrix4<f64>,
    r_inv: f64,
    cfg: &'a RiccatiConfig,
}

impl Refine<'_, '_> {
    /// Advances from `t` to `t - dt`, pushing every output point (in
    /// backward order) and returning the cost-to-go at `t - dt`.
    fn step(&self, s: &Matrix4<f64>, t: f64, dt: f64, out: &mut Vec<(f64, Matrix4<f64>)>) -> Result<Matrix4<f64>> {
        let mut end = advance(self.lin, s, t, dt, self.q, self.r_inv, 0)?;
        end = (end + end.transpose()) * 0.5;
        if dt > 2.0 * self.cfg.min_step {
            let k0 = (self.lin)(t)?.1.transpose() * s;
            let k1 = (self.lin)(t - dt)?.1.transpose() * end;
            let scale = k0.norm().max(k1.norm()) * self.r_inv;
            if (k1 - k0).norm() * self.r_inv > self.cfg.gain_resolution * scale.max(1.0) {
                let mid = self.step(s, t, 0.5 * dt, out)?;
                return self.step(&mid, t - 0.5 * dt, 0.5 * dt, out);
            }
        }
        out.push((t - dt, end));
        Ok(end)
    }
}

/// Integrates the Riccati equation backward through consecutive intervals
/// (given in forward order) with step-halving RK4, sampled every
/// `cfg.step` and more densely where the gain moves fast. The cost-to-go is
/// carried unchanged across interval boundaries; a boundary gain uses the
/// earlier interval's model.
pub fn integrate_backward(intervals: &[Interval<'_>], cfg: &RiccatiConfig, attempt: u32) -> Result<RiccatiSolution> {
    cfg.validate()?;
    let q = to_matrix(&cfg.q);
    let r_inv = 1.0 / cfg.r;
    let mut s = to_matrix(&cfg.s_final);
    let mut times: Vec<f64> = Vec::new();
    let mut gains: Vec<[f64; 4]> = Vec::new();
    let mut ss: Vec<Matrix4<f64>> = Vec::new();

    let gain_of = |s: &Matrix4<f64>, b: &Vector4<f64>| {
        let k = b.transpose() * s * r_inv;
        [k[0], k[1], k[2], k[3]]
    };

    for (idx, iv) in intervals.iter().enumerate().rev() {
        let len = iv.end - iv.start;
        if !(len > 0.0) {
            continue;
        }
        let n = (len / cfg.step).ceil().max(1.0) as usize;
        let dt = len / n as f64;
        let mut t = iv.end;
        let last_interval = idx + 1 == intervals.len();
        if last_interval {
            let (_, b) = (iv.linearize)(t)?;
            times.push(t);
            gains.push(gain_of(&s, &b));
            ss.push(s);
        }
        for i in 0..n {
            let t_next = iv.end - (i + 1) as f64 * dt;
            let mut points = Vec::new();
            let refine = Refine {
                lin: &iv.linearize,
                q: &q,
                r_inv,
                cfg,
            };
            s = refine.step(&s, t, dt, &mut points)?;
            t = t_next;
            let count = points.len();
            for (j, (tp, sp)) in points.into_iter().enumerate() {
                let norm = sp.norm();
                if !norm.is_finite() || norm > cfg.blow_up {
                    return Err(Error::RiccatiBlowUp { t: tp, norm });
                }
                let interval_start = i + 1 == n && j + 1 == count;
                let t_store = if interval_start { iv.start } else { tp };
                let b = if interval_start && idx > 0 {
                    // boundary point: stored once, with the earlier interval's model
                    (intervals[idx - 1].linearize)(iv.start)?.1
                } else {
                    (iv.linearize)(t_store)?.1
                };
                times.push(t_store);
                gains.push(gain_of(&sp, &b));
                ss.push(sp);
            }
        }
    }
    times.reverse();
    gains.reverse();
    ss.reverse();

    let mut health = RiccatiHealth {
        min_eigenvalue: f64::INFINITY,
        max_asymmetry: 0.0,
        max_norm: 0.0,
        samples: ss.len(),
    };
    for m in &ss {
        health.min_eigenvalue = health.min_eigenvalue.min(m.symmetric_eigenvalues().min());
        health.max_asymmetry = health.max_asymmetry.max((m - m.transpose()).amax());
        health.max_norm = health.max_norm.max(m.norm());
    }
    let t_rel = intervals.first().map(|i| i.end).unwrap_or(0.0);
    Ok(RiccatiSolution {
        schedule: GainSchedule {
            format: GAIN_FORMAT.to_string(),
            breakpoints: times,
            gains,
            t_rel,
            attempt,
        },
        cost_to_go: ss,
        health,
    })
}

/// Riccati pass along a planned trajectory, through the phase switch.
pub fn riccati_solve(spline: &TrajectorySpline, params: &RobotParams, cfg: &RiccatiConfig) -> Result<RiccatiSolution> {
    let swing = PhaseParams::new(params, Phase::Swing);
    let flight = PhaseParams::new(params, Phase::Flight);
    let lin = |model: PhaseParams| move |t: f64| model.linearize(&spline.state(t), spline.control(t));
    let mut intervals = Vec::with_capacity(2);
    let has_swing = spline.phases.first() == Some(&Phase::Swing);
    if has_swing {
        intervals.push(Interval {
            start: spline.start_time(),
            end: spline.t_rel,
            linearize: Box::new(lin(swing)),
        });
    }
    intervals.push(Interval {
        start: if has_swing { spline.t_rel } else { spline.start_time() },
        end: spline.end_time(),
        linearize: Box::new(lin(flight)),
    });
    let mut sol = integrate_backward(&intervals, cfg, spline.metadata.attempt)?;
    sol.schedule.t_rel = spline.t_rel;
    Ok(sol)
}

/// Gain schedule `K(t) = R^-1 B(t)^T S(t)` along `spline`.
pub fn riccati_backward(spline: &TrajectorySpline, params: &RobotParams, cfg: &RiccatiConfig) -> Result<GainSchedule> {
    Ok(riccati_solve(spline, params, cfg)?.schedule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::State;
    use nalgebra::Matrix4;

    fn hanging_equilibrium() -> (Matrix4<f64>, Vector4<f64>) {
        let sw = PhaseParams::new(&RobotParams::default(), Phase::Swing);
        let t = sw.theta;
        let a = (-t[4]).atan2(t[5]);
        let a = if a.sin() > 0.0 { a } else { a + std::f64::consts::PI };
        let x = State::new(a - sw.kappa1, std::f64::consts::FRAC_PI_2 - a, 0.0, 0.0);
        sw.linearize(&x, 0.0).unwrap()
    }

    /// Discrete ARE of the Euler discretization, iterated to a fixed point.
    fn dare_oracle(a: &Matrix4<f64>, b: &Vector4<f64>, q: &Matrix4<f64>, r: f64, dt: f64) -> Matrix4<f64> {
        let ad = Matrix4::identity() + a * dt;
        let bd = b * dt;
        let (qd, rd) = (q * dt, r * dt);
        let mut p = *q;
        for _ in 0..20_000_000 {
            let pb = p * bd;
            let denom = rd + (bd.transpose() * pb)[0];
            let next = qd + ad.transpose() * p * ad - ad.transpose() * pb * pb.transpose() * ad / denom;
            let next = (next + next.transpose()) * 0.5;
            if (next - p).amax() < 1e-13 * p.amax().max(1.0) {
                return next;
            }
            p = next;
        }
        panic!("DARE did not converge");
    }

    #[test]
    fn long_horizon_gain_matches_algebraic_riccati() {
        let (a, b) = hanging_equilibrium();
        let cfg = RiccatiConfig::default();
        let q = to_matrix(&cfg.q);
        // two-level Richardson extrapolation of the O(dt) discretization error
        let p1 = dare_oracle(&a, &b, &q, cfg.r, 1e-4);
        let p2 = dare_oracle(&a, &b, &q, cfg.r, 5e-5);
        let p3 = dare_oracle(&a, &b, &q, cfg.r, 2.5e-5);
        let (r1, r2) = (p2 * 2.0 - p1, p3 * 2.0 - p2);
        let p = (r2 * 4.0 - r1) / 3.0;
        let k_care = b.transpose() * p / cfg.r;

        let interval = Interval {
            start: 0.0,
            end: 40.0,
            linearize: Box::new(move |_t| Ok((a, b))),
        };
        let sol = integrate_backward(&[interval], &cfg, 0).unwrap();
        let k0 = RowVector4::from(sol.schedule.gains[0]);
        let err = (k0 - k_care).amax() / k_care.amax();
        assert!(err < 1e-4, "K(0) = {k0}, CARE = {k_care}, rel err {err:e}");
    }

    #[test]
    fn schedule_interpolates_linearly_and_clamps() {
        let g = GainSchedule {
            format: GAIN_FORMAT.into(),
            breakpoints: vec![0.0, 1.0, 2.0],
            gains: vec![[0.0; 4], [1.0, 2.0, 3.0, 4.0], [1.0; 4]],
            t_rel: 1.0,
            attempt: 0,
        };
        assert_eq!(g.gain(0.5), RowVector4::new(0.5, 1.0, 1.5, 2.0));
        assert_eq!(g.gain(1.0), RowVector4::new(1.0, 2.0, 3.0, 4.0));
        assert_eq!(g.gain(-3.0), RowVector4::zeros());
        assert_eq!(g.gain(9.0), RowVector4::repeat(1.0));
        let back = GainSchedule::from_json(&g.to_json()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn config_rejects_indefinite_weights() {
        let mut cfg = RiccatiConfig::default();
        cfg.q[0][0] = -1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = RiccatiConfig::default();
        cfg.r = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = RiccatiConfig::default();
        cfg.q[0][1] = 1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn blow_up_is_reported() {
        let mut cfg = RiccatiConfig::default();
        cfg.blow_up = 1e3;
        // unstable, uncontrolled system: S grows without bound
        let interval = Interval {
            start: 0.0,
            end: 10.0,
            linearize: Box::new(|_t| Ok((Matrix4::identity() * 2.0, Vector4::zeros()))),
        };
        assert!(matches!(
            integrate_backward(&[interval], &cfg, 0),
            Err(Error::RiccatiBlowUp { .. })
        ));
    }
}
