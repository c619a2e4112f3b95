//! Hermite-Simpson transcription of the full two-phase maneuver and of the
//! flight-only correction problem.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{Matrix4, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use super::nlp::{ConstraintJacobian, ConstraintValues, NlpOptions, NlpProblem, SparseRow};
use crate::dynamics::{
    attack_angle_from, com_offset, com_offset_rate, gripper_offset, release_map, Phase, PhaseParams, ReleaseState,
    RobotParams, State, TargetSpec,
};
use crate::error::{Error, Result};

const FREE: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KnotGrid {
    pub n_swing: usize,
    pub n_flight: usize,
}

impl Default for KnotGrid {
    fn default() -> Self {
        Self {
            n_swing: 25,
            n_flight: 25,
        }
    }
}

impl KnotGrid {
    pub fn validate(&self) -> Result<()> {
        if self.n_swing < 4 || self.n_flight < 4 {
            return Err(Error::invalid("grid", "each phase needs at least 4 segments"));
        }
        Ok(())
    }
}

/// Box bounds on states, control and phase durations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoxBounds {
    pub u_max: f64,
    pub rate_max: f64,
    pub beta_min: f64,
    pub beta_max: f64,
    pub duration_min: f64,
    pub duration_max: f64,
}

impl Default for BoxBounds {
    fn default() -> Self {
        Self {
            u_max: 40.0,
            rate_max: 4.0 * std::f64::consts::PI,
            beta_min: -2.8,
            beta_max: 2.8,
            duration_min: 0.2,
            duration_max: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub nlp: NlpOptions,
    pub bounds: BoxBounds,
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let o = &self.nlp;
        if !(o.constraint_tol > 0.0 && o.cost_tol > 0.0 && o.optimality_tol > 0.0) {
            return Err(Error::invalid("solver", "tolerances must be positive"));
        }
        if !(o.penalty_growth > 1.0 && o.initial_penalty > 0.0) {
            return Err(Error::invalid("solver", "penalty must be positive and growing"));
        }
        let b = &self.bounds;
        if !(b.u_max > 0.0 && b.rate_max > 0.0 && b.beta_min < b.beta_max) {
            return Err(Error::invalid("bounds", "empty state or control box"));
        }
        if !(0.0 < b.duration_min && b.duration_min < b.duration_max) {
            return Err(Error::invalid("bounds", "duration bounds must satisfy 0 < min < max"));
        }
        Ok(())
    }
}

/// Hermite-Simpson midpoint state and defect of one segment.
pub fn hermite_simpson_defect(
    model: &PhaseParams,
    x0: &State,
    x1: &State,
    u0: f64,
    um: f64,
    u1: f64,
    h: f64,
) -> Result<State> {
    let f0 = model.forward_dynamics(x0, u0)?;
    let f1 = model.forward_dynamics(x1, u1)?;
    let xm = (x0 + x1) * 0.5 + (f0 - f1) * (h / 8.0);
    let fm = model.forward_dynamics(&xm, um)?;
    Ok(x1 - x0 - (f0 + fm * 4.0 + f1) * (h / 6.0))
}

/// Partial derivatives of a segment defect.
pub struct DefectJacobian {
    pub dx0: Matrix4<f64>,
    pub dx1: Matrix4<f64>,
    pub du0: Vector4<f64>,
    pub dum: Vector4<f64>,
    pub du1: Vector4<f64>,
    pub dh: Vector4<f64>,
}

pub fn hermite_simpson_jacobian(
    model: &PhaseParams,
    x0: &State,
    x1: &State,
    u0: f64,
    um: f64,
    u1: f64,
    h: f64,
) -> Result<DefectJacobian> {
    let f0 = model.forward_dynamics(x0, u0)?;
    let f1 = model.forward_dynamics(x1, u1)?;
    let xm = (x0 + x1) * 0.5 + (f0 - f1) * (h / 8.0);
    let fm = model.forward_dynamics(&xm, um)?;
    let (a0, b0) = model.linearize(x0, u0)?;
    let (a1, b1) = model.linearize(x1, u1)?;
    let (am, bm) = model.linearize(&xm, um)?;
    let eye = Matrix4::identity();
    let c = h / 6.0;
    let dxm_dx0 = eye * 0.5 + a0 * (h / 8.0);
    let dxm_dx1 = eye * 0.5 - a1 * (h / 8.0);
    Ok(DefectJacobian {
        dx0: -eye - (a0 + am * dxm_dx0 * 4.0) * c,
        dx1: eye - (am * dxm_dx1 * 4.0 + a1) * c,
        du0: -(b0 + am * b0 * (h / 2.0)) * c,
        dum: -bm * (4.0 * c),
        du1: -(b1 - am * b1 * (h / 2.0)) * c,
        dh: -(f0 + fm * 4.0 + f1) / 6.0 - am * (f0 - f1) * (h / 12.0),
    })
}

/// Simpson quadrature of `u^2` over segments given as (start, mid, end) controls.
pub fn simpson_cost(controls: &[[f64; 3]], h: &[f64]) -> f64 {
    controls
        .iter()
        .zip(h)
        .map(|([u0, um, u1], h)| h / 6.0 * (u0 * u0 + 4.0 * um * um + u1 * u1))
        .sum()
}

/// Flight knots `j` (0-based from release) with `j / n_flight` inside the
/// approach window.
pub fn window_knots(n_flight: usize, target: &TargetSpec) -> Vec<usize> {
    let eps = 1e-9;
    (0..=n_flight)
        .filter(|&j| {
            let frac = j as f64 / n_flight as f64;
            frac >= target.phi_min - eps && frac <= target.phi_max + eps
        })
        .collect()
}

/// `[psi + offset - gamma_max, gamma_min - psi - offset]`; both must be <= 0.
pub fn approach_residuals(psi: f64, offset: f64, target: &TargetSpec) -> [f64; 2] {
    let a = psi + offset;
    [a - target.gamma_max, target.gamma_min - a]
}

/// Gripper minus target at the final time.
pub fn terminal_residual(gripper: &Vector2<f64>, target: &TargetSpec) -> Vector2<f64> {
    gripper - Vector2::from(target.p0t)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mode {
    /// Swing plus flight from a fixed initial state.
    Full { x0: State },
    /// Flight only, from an estimated release.
    Flight { release: ReleaseState },
}

/// Index layout of the decision vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub n_swing: usize,
    pub n_flight: usize,
    pub has_swing: bool,
}

impl Layout {
    pub fn segments(&self) -> usize {
        self.n_swing + self.n_flight
    }
    pub fn knots(&self) -> usize {
        self.segments() + 1
    }
    pub fn x(&self, k: usize) -> usize {
        4 * k
    }
    pub fn u(&self, k: usize) -> usize {
        4 * self.knots() + k
    }
    pub fn um(&self, k: usize) -> usize {
        5 * self.knots() + k
    }
    /// Swing duration (full problem only).
    pub fn t0(&self) -> usize {
        5 * self.knots() + self.segments()
    }
    /// Flight duration.
    pub fn t1(&self) -> usize {
        self.t0() + usize::from(self.has_swing)
    }
    /// Auxiliary approach angle (flight problem only).
    pub fn upsilon(&self) -> usize {
        self.t1() + 1
    }
    /// Flight-side control at the release knot (full problem only).
    pub fn u_release(&self) -> usize {
        self.t1() + 1
    }
    pub fn dim(&self) -> usize {
        self.t1() + 2
    }
    /// Index of the control at the start of segment `k`.
    pub fn seg_u0(&self, k: usize) -> usize {
        if self.has_swing && k == self.n_swing {
            self.u_release()
        } else {
            self.u(k)
        }
    }
    pub fn release_knot(&self) -> usize {
        self.n_swing
    }
}

/// Finite-dimensional program for one planning problem.
#[derive(Debug, Clone)]
pub struct Transcription {
    pub params: RobotParams,
    pub target: TargetSpec,
    pub mode: Mode,
    pub layout: Layout,
    pub swing: PhaseParams,
    pub flight: PhaseParams,
    pub window: Vec<usize>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Transcription {
    pub fn full(
        params: &RobotParams,
        target: &TargetSpec,
        x0: State,
        grid: KnotGrid,
        bounds: &BoxBounds,
    ) -> Result<Self> {
        grid.validate()?;
        let layout = Layout {
            n_swing: grid.n_swing,
            n_flight: grid.n_flight,
            has_swing: true,
        };
        Self::build(params, target, Mode::Full { x0 }, layout, bounds)
    }

    pub fn flight(
        params: &RobotParams,
        target: &TargetSpec,
        release: ReleaseState,
        n_flight: usize,
        bounds: &BoxBounds,
    ) -> Result<Self> {
        if n_flight < 4 {
            return Err(Error::invalid("grid", "flight needs at least 4 segments"));
        }
        let layout = Layout {
            n_swing: 0,
            n_flight,
            has_swing: false,
        };
        Self::build(params, target, Mode::Flight { release }, layout, bounds)
    }

    fn build(params: &RobotParams, target: &TargetSpec, mode: Mode, layout: Layout, b: &BoxBounds) -> Result<Self> {
        params.validate()?;
        target.validate()?;
        let window = window_knots(layout.n_flight, target);
        if window.is_empty() {
            return Err(Error::EmptyApproachWindow {
                start: target.phi_min,
                end: target.phi_max,
            });
        }
        let n = layout.dim();
        let mut lower = vec![-FREE; n];
        let mut upper = vec![FREE; n];
        for k in 0..layout.knots() {
            let i = layout.x(k);
            lower[i + 1] = b.beta_min;
            upper[i + 1] = b.beta_max;
            for r in 2..4 {
                lower[i + r] = -b.rate_max;
                upper[i + r] = b.rate_max;
            }
            lower[layout.u(k)] = -b.u_max;
            upper[layout.u(k)] = b.u_max;
        }
        for k in 0..layout.segments() {
            lower[layout.um(k)] = -b.u_max;
            upper[layout.um(k)] = b.u_max;
        }
        if layout.has_swing {
            lower[layout.u_release()] = -b.u_max;
            upper[layout.u_release()] = b.u_max;
            lower[layout.t0()] = b.duration_min;
            upper[layout.t0()] = b.duration_max;
        }
        lower[layout.t1()] = b.duration_min;
        upper[layout.t1()] = b.duration_max;
        Ok(Self {
            params: *params,
            target: *target,
            mode,
            layout,
            swing: PhaseParams::new(params, Phase::Swing),
            flight: PhaseParams::new(params, Phase::Flight),
            window,
            lower,
            upper,
        })
    }

    pub fn state(&self, z: &[f64], k: usize) -> State {
        let i = self.layout.x(k);
        State::new(z[i], z[i + 1], z[i + 2], z[i + 3])
    }

    pub fn swing_duration(&self, z: &[f64]) -> f64 {
        if self.layout.has_swing {
            z[self.layout.t0()]
        } else {
            0.0
        }
    }

    pub fn flight_duration(&self, z: &[f64]) -> f64 {
        z[self.layout.t1()]
    }

    /// Angle offset used in the approach constraint.
    pub fn approach_offset(&self, z: &[f64]) -> f64 {
        match self.mode {
            Mode::Full { .. } => self.target.somersault_offset(),
            Mode::Flight { .. } => z[self.layout.upsilon()],
        }
    }

    pub fn segment_length(&self, z: &[f64], k: usize) -> f64 {
        let l = &self.layout;
        if k < l.n_swing {
            z[l.t0()] / l.n_swing as f64
        } else {
            z[l.t1()] / l.n_flight as f64
        }
    }

    fn segment_model(&self, k: usize) -> &PhaseParams {
        if k < self.layout.n_swing {
            &self.swing
        } else {
            &self.flight
        }
    }

    /// Absolute time of knot `k`.
    pub fn knot_time(&self, z: &[f64], k: usize) -> f64 {
        let l = &self.layout;
        let t_start = match &self.mode {
            Mode::Full { .. } => 0.0,
            Mode::Flight { release } => release.t_rel,
        };
        if k <= l.n_swing && l.has_swing {
            t_start + k as f64 * z[l.t0()] / l.n_swing as f64
        } else {
            let t_rel = t_start + self.swing_duration(z);
            t_rel + (k - l.n_swing) as f64 * z[l.t1()] / l.n_flight as f64
        }
    }

    pub fn release(&self, z: &[f64]) -> ReleaseState {
        match &self.mode {
            Mode::Full { .. } => {
                let k = self.layout.release_knot();
                release_map(&self.params, &self.state(z, k), z[self.layout.t0()])
            }
            Mode::Flight { release } => *release,
        }
    }

    /// Gripper position at flight knot `j` for a given release.
    fn gripper_at(&self, release: &ReleaseState, x: &State, s: f64) -> Vector2<f64> {
        release.com_at(release.t_rel + s) + com_offset(&self.params, x[0], x[1]) + gripper_offset(&self.params, x[0])
    }

    /// Derivative of the gripper position with respect to `(alpha, beta)`.
    fn gripper_posture_jacobian(&self, x: &State) -> [Vector2<f64>; 2] {
        let p = &self.params;
        let m = p.total_mass();
        let (w1, w2) = (p.m1 * p.r1 / m, p.m2 * p.r2 / m);
        let (a, ab) = (x[0], x[0] + x[1]);
        let d_beta = Vector2::new(-w2 * ab.sin(), w2 * ab.cos());
        let d_alpha = Vector2::new(-w1 * a.sin(), w1 * a.cos()) + d_beta + gripper_offset(p, x[0] + FRAC_PI_2);
        [d_alpha, d_beta]
    }

    /// Sensitivities of `(p0c, v0c)` to the release knot state.
    fn release_jacobian(&self, z: &[f64]) -> [[Vector2<f64>; 2]; 4] {
        let k = self.layout.release_knot();
        let x = self.state(z, k);
        let h = 1e-6;
        let mut out = [[Vector2::zeros(); 2]; 4];
        for (i, slot) in out.iter_mut().enumerate() {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let rp = release_map(&self.params, &xp, 0.0);
            let rm = release_map(&self.params, &xm, 0.0);
            *slot = [(rp.p0c() - rm.p0c()) / (2.0 * h), (rp.v0c() - rm.v0c()) / (2.0 * h)];
        }
        out
    }

    /// Gripper Jacobian row pair at flight knot `j`.
    fn gripper_rows(&self, z: &[f64], j: usize, release: &ReleaseState) -> [SparseRow; 2] {
        let l = &self.layout;
        let k = l.n_swing + j;
        let x = self.state(z, k);
        let frac = j as f64 / l.n_flight as f64;
        let s = frac * z[l.t1()];
        let [da, db] = self.gripper_posture_jacobian(&x);
        let dt = (release.v0c() + Vector2::new(0.0, release.g_y * s)) * frac;
        let mut rows = [SparseRow::default(), SparseRow::default()];
        for (r, row) in rows.iter_mut().enumerate() {
            row.push(l.x(k), da[r]);
            row.push(l.x(k) + 1, db[r]);
            row.push(l.t1(), dt[r]);
        }
        if l.has_swing {
            let rel = self.release_jacobian(z);
            let kr = l.release_knot();
            for (i, [dp, dv]) in rel.iter().enumerate() {
                for (r, row) in rows.iter_mut().enumerate() {
                    row.push(l.x(kr) + i, dp[r] + dv[r] * s);
                }
            }
        }
        rows
    }

    pub fn gripper_at_knot(&self, z: &[f64], j: usize) -> Vector2<f64> {
        let release = self.release(z);
        let k = self.layout.n_swing + j;
        let s = j as f64 / self.layout.n_flight as f64 * z[self.layout.t1()];
        self.gripper_at(&release, &self.state(z, k), s)
    }

    pub fn attack_angle_at_knot(&self, z: &[f64], j: usize) -> Result<f64> {
        let g = self.gripper_at_knot(z, j);
        let k = self.layout.n_swing + j;
        attack_angle_from(&self.params, z[self.layout.x(k)], &(Vector2::from(self.target.p0t) - g))
    }

    /// Attack angle in the limit of arrival: the direction to the target is
    /// then the gripper velocity direction.
    pub fn arrival_attack_angle(&self, z: &[f64]) -> Result<f64> {
        let l = &self.layout;
        let release = self.release(z);
        let x = self.state(z, l.segments());
        let v_com = release.com_velocity_at(release.t_rel + z[l.t1()]);
        let v = v_com + com_offset_rate(&self.params, &x) + gripper_offset(&self.params, x[0] + FRAC_PI_2) * x[2];
        attack_angle_from(&self.params, x[0], &v)
    }

    fn arrival_row(&self, z: &[f64]) -> Result<SparseRow> {
        let l = &self.layout;
        let mut cols: Vec<usize> = (0..4).map(|c| l.x(l.segments()) + c).collect();
        cols.push(l.t1());
        if l.has_swing {
            cols.extend((0..4).map(|c| l.x(l.release_knot()) + c));
        }
        let h = 1e-7;
        let mut row = SparseRow::default();
        let mut zp = z.to_vec();
        for c in cols {
            let orig = zp[c];
            zp[c] = orig + h;
            let fp = self.arrival_attack_angle(&zp)?;
            zp[c] = orig - h;
            let fm = self.arrival_attack_angle(&zp)?;
            zp[c] = orig;
            row.push(c, (fp - fm) / (2.0 * h));
        }
        if !l.has_swing {
            row.push(l.upsilon(), 1.0);
        }
        Ok(row)
    }

    fn initial_state(&self) -> State {
        match &self.mode {
            Mode::Full { x0 } => *x0,
            Mode::Flight { release } => release.state(),
        }
    }

    /// Start, midpoint and end control of every segment.
    pub fn segment_controls(&self, z: &[f64]) -> Vec<[f64; 3]> {
        let l = &self.layout;
        (0..l.segments())
            .map(|k| [z[l.seg_u0(k)], z[l.um(k)], z[l.u(k + 1)]])
            .collect()
    }

    pub fn segment_lengths(&self, z: &[f64]) -> Vec<f64> {
        (0..self.layout.segments()).map(|k| self.segment_length(z, k)).collect()
    }

    /// Largest defect norm over all segments.
    pub fn max_defect(&self, z: &[f64]) -> Result<f64> {
        let mut worst = 0.0f64;
        for k in 0..self.layout.segments() {
            let d = self.defect(z, k)?;
            worst = worst.max(d.norm());
        }
        Ok(worst)
    }

    fn defect(&self, z: &[f64], k: usize) -> Result<State> {
        let l = &self.layout;
        hermite_simpson_defect(
            self.segment_model(k),
            &self.state(z, k),
            &self.state(z, k + 1),
            z[l.seg_u0(k)],
            z[l.um(k)],
            z[l.u(k + 1)],
            self.segment_length(z, k),
        )
    }

    /// State derivatives at both ends of segment `k`, using that segment's phase.
    pub fn segment_end_rates(&self, z: &[f64], k: usize) -> Result<(State, State)> {
        let l = &self.layout;
        let m = self.segment_model(k);
        Ok((
            m.forward_dynamics(&self.state(z, k), z[l.seg_u0(k)])?,
            m.forward_dynamics(&self.state(z, k + 1), z[l.u(k + 1)])?,
        ))
    }

    pub fn segment_phase(&self, k: usize) -> Phase {
        self.segment_model(k).phase
    }

    pub fn check_dimension(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.layout.dim() {
            return Err(Error::GuessDimension {
                expected: self.layout.dim(),
                got: z.len(),
            });
        }
        Ok(())
    }
}

impl NlpProblem for Transcription {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn lower_bounds(&self) -> &[f64] {
        &self.lower
    }

    fn upper_bounds(&self) -> &[f64] {
        &self.upper
    }

    fn cost(&self, z: &[f64]) -> f64 {
        simpson_cost(&self.segment_controls(z), &self.segment_lengths(z))
    }

    fn cost_gradient(&self, z: &[f64]) -> Vec<f64> {
        let l = &self.layout;
        let mut g = vec![0.0; l.dim()];
        for k in 0..l.segments() {
            let h = self.segment_length(z, k);
            let (u0, um, u1) = (z[l.seg_u0(k)], z[l.um(k)], z[l.u(k + 1)]);
            g[l.seg_u0(k)] += h / 3.0 * u0;
            g[l.um(k)] += 4.0 * h / 3.0 * um;
            g[l.u(k + 1)] += h / 3.0 * u1;
            let per_t = (u0 * u0 + 4.0 * um * um + u1 * u1) / 6.0;
            if k < l.n_swing {
                g[l.t0()] += per_t / l.n_swing as f64;
            } else {
                g[l.t1()] += per_t / l.n_flight as f64;
            }
        }
        g
    }

    fn cost_curvature(&self, z: &[f64]) -> Vec<f64> {
        let l = &self.layout;
        let mut c = vec![0.0; l.dim()];
        for k in 0..l.segments() {
            let h = self.segment_length(z, k);
            c[l.seg_u0(k)] += h / 3.0;
            c[l.um(k)] += 4.0 * h / 3.0;
            c[l.u(k + 1)] += h / 3.0;
        }
        c
    }

    fn constraints(&self, z: &[f64]) -> Result<ConstraintValues> {
        let l = &self.layout;
        let mut eq = Vec::with_capacity(4 * l.segments() + 6);
        let x0 = self.initial_state();
        eq.extend((self.state(z, 0) - x0).iter());
        for k in 0..l.segments() {
            eq.extend(self.defect(z, k)?.iter());
        }
        let end = terminal_residual(&self.gripper_at_knot(z, l.n_flight), &self.target);
        eq.extend(end.iter());

        let offset = self.approach_offset(z);
        let mut ineq = Vec::with_capacity(2 * self.window.len());
        for &j in &self.window {
            let psi = self.attack_angle_at_knot(z, j)?;
            ineq.extend(approach_residuals(psi, offset, &self.target));
        }
        if self.target.arrival_in_band {
            let psi = self.arrival_attack_angle(z)?;
            let m = self.target.arrival_margin;
            let [hi, lo] = approach_residuals(psi, offset, &self.target);
            ineq.extend([hi + m, lo + m]);
        }
        Ok(ConstraintValues { eq, ineq })
    }

    fn jacobian(&self, z: &[f64]) -> Result<ConstraintJacobian> {
        let l = &self.layout;
        let mut eq = Vec::with_capacity(4 * l.segments() + 6);
        for r in 0..4 {
            let mut row = SparseRow::default();
            row.push(l.x(0) + r, 1.0);
            eq.push(row);
        }
        for k in 0..l.segments() {
            let h = self.segment_length(z, k);
            let jac = hermite_simpson_jacobian(
                self.segment_model(k),
                &self.state(z, k),
                &self.state(z, k + 1),
                z[l.seg_u0(k)],
                z[l.um(k)],
                z[l.u(k + 1)],
                h,
            )?;
            let (t_col, per_t) = if k < l.n_swing {
                (l.t0(), 1.0 / l.n_swing as f64)
            } else {
                (l.t1(), 1.0 / l.n_flight as f64)
            };
            for r in 0..4 {
                let mut row = SparseRow::default();
                for c in 0..4 {
                    row.push(l.x(k) + c, jac.dx0[(r, c)]);
                    row.push(l.x(k + 1) + c, jac.dx1[(r, c)]);
                }
                row.push(l.seg_u0(k), jac.du0[r]);
                row.push(l.um(k), jac.dum[r]);
                row.push(l.u(k + 1), jac.du1[r]);
                row.push(t_col, jac.dh[r] * per_t);
                eq.push(row);
            }
        }
        let release = self.release(z);
        let [rx, ry] = self.gripper_rows(z, l.n_flight, &release);
        eq.push(rx);
        eq.push(ry);

        let mut ineq = Vec::with_capacity(2 * self.window.len());
        for &j in &self.window {
            let g = self.gripper_at(
                &release,
                &self.state(z, l.n_swing + j),
                j as f64 / l.n_flight as f64 * z[l.t1()],
            );
            let d = Vector2::from(self.target.p0t) - g;
            let r2 = d.norm_squared();
            // dpsi/dgripper = (-d_y, d_x) / |d|^2, plus d(alpha) = 1
            let dpsi_dg = Vector2::new(-d[1] / r2, d[0] / r2);
            let [gx, gy] = self.gripper_rows(z, j, &release);
            let mut row = SparseRow::default();
            for &(c, v) in &gx.entries {
                row.push(c, dpsi_dg[0] * v);
            }
            for &(c, v) in &gy.entries {
                row.push(c, dpsi_dg[1] * v);
            }
            row.push(l.x(l.n_swing + j), 1.0);
            if !l.has_swing {
                row.push(l.upsilon(), 1.0);
            }
            let mut neg = SparseRow::default();
            for &(c, v) in &row.entries {
                neg.push(c, -v);
            }
            ineq.push(row);
            ineq.push(neg);
        }
        if self.target.arrival_in_band {
            let row = self.arrival_row(z)?;
            let mut neg = SparseRow::default();
            for &(c, v) in &row.entries {
                neg.push(c, -v);
            }
            ineq.push(row);
            ineq.push(neg);
        }
        Ok(ConstraintJacobian { eq, ineq })
    }
}
