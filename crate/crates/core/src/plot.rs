//! Self-contained SVG plots of trajectories and sweep regions.

use std::fmt::Write as _;

use crate::dynamics::{gripper_offset, hip_position_swing, Phase, RobotParams};
use crate::planner::TrajectorySpline;
use crate::sim::SweepGrid;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// A labelled polyline in world coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<[f64; 2]>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<[f64; 2]>) -> Self {
        Self {
            label: label.into(),
            points,
        }
    }
}

/// Hip path over the whole plan and gripper path over the flight, sampled
/// every `dt` seconds.
pub fn plan_paths(spline: &TrajectorySpline, params: &RobotParams, dt: f64) -> (Series, Series) {
    let (t0, t1) = (spline.start_time(), spline.end_time());
    let n = ((t1 - t0) / dt).ceil().max(1.0) as usize;
    let mut hip = Vec::with_capacity(n + 1);
    let mut gripper = Vec::new();
    for k in 0..=n {
        let t = (t0 + k as f64 * dt).min(t1);
        let x = spline.state(t);
        if spline.phase_at(t) == Phase::Swing && t < spline.t_rel {
            let h = hip_position_swing(params, x[0]);
            hip.push([h[0], h[1]]);
        } else {
            let h = spline.release.com_at(t) + crate::dynamics::com_offset(params, x[0], x[1]);
            let g = h + gripper_offset(params, x[0]);
            hip.push([h[0], h[1]]);
            gripper.push([g[0], g[1]]);
        }
    }
    (Series::new("hip", hip), Series::new("gripper", gripper))
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    /// Bounds around every point with equal scale on both axes.
    fn fit(points: impl Iterator<Item = [f64; 2]>) -> Self {
        let (mut xmin, mut xmax, mut ymin, mut ymax) =
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for [x, y] in points.filter(|p| p[0].is_finite() && p[1].is_finite()) {
            xmin = xmin.min(x);
            xmax = xmax.max(x);
            ymin = ymin.min(y);
            ymax = ymax.max(y);
        }
        if !xmin.is_finite() {
            (xmin, xmax, ymin, ymax) = (-1.0, 1.0, -1.0, 1.0);
        }
        let pad = 0.05 * (xmax - xmin).max(ymax - ymin).max(1e-3);
        let (mut x, mut y) = ((xmin - pad, xmax + pad), (ymin - pad, ymax + pad));
        let sx = (x.1 - x.0) / (WIDTH - 2.0 * MARGIN);
        let sy = (y.1 - y.0) / (HEIGHT - 2.0 * MARGIN);
        if sx > sy {
            let grow = 0.5 * (sx * (HEIGHT - 2.0 * MARGIN) - (y.1 - y.0));
            y = (y.0 - grow, y.1 + grow);
        } else {
            let grow = 0.5 * (sy * (WIDTH - 2.0 * MARGIN) - (x.1 - x.0));
            x = (x.0 - grow, x.1 + grow);
        }
        Self { x, y }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }

    fn scale(&self) -> f64 {
        (WIDTH - 2.0 * MARGIN) / (self.x.1 - self.x.0)
    }
}

fn open(svg: &mut String, title: &str) {
    let _ = write!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>
"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn axes(svg: &mut String, x: (f64, f64), y: (f64, f64), xlabel: &str, ylabel: &str) {
    let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        svg,
        r#"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        r - l,
        b - t
    );
    let _ = writeln!(
        svg,
        r#"<text x="{l}" y="{}" text-anchor="start">{:.3}</text>"#,
        b + 16.0,
        x.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{r}" y="{}" text-anchor="end">{:.3}</text>"#,
        b + 16.0,
        x.1
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{b}" text-anchor="end">{:.3}</text>"#,
        l - 4.0,
        y.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="end">{:.3}</text>"#,
        l - 4.0,
        t + 10.0,
        y.1
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        b + 34.0,
        escape(xlabel)
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(ylabel)
    );
}

fn legend(svg: &mut String, entries: &[(&str, &str)]) {
    for (k, (label, color)) in entries.iter().enumerate() {
        let y = MARGIN + 16.0 + 16.0 * k as f64;
        let x = WIDTH - MARGIN - 150.0;
        let _ = writeln!(
            svg,
            r#"<rect x="{x}" y="{}" width="12" height="12" fill="{color}"/>"#,
            y - 10.0
        );
        let _ = writeln!(svg, r#"<text x="{}" y="{y}">{}</text>"#, x + 18.0, escape(label));
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Paths in the sagittal plane with the target and its landing circle.
pub fn trajectory_svg(title: &str, series: &[Series], target: [f64; 2], radius: f64) -> String {
    let frame = Frame::fit(series.iter().flat_map(|s| s.points.iter().copied()).chain([
        [target[0] - radius, target[1] - radius],
        [target[0] + radius, target[1] + radius],
        [0.0, 0.0],
    ]));
    let mut svg = String::new();
    open(&mut svg, title);
    axes(&mut svg, frame.x, frame.y, "x (m)", "y (m)");
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|p| p[0].is_finite() && p[1].is_finite())
            .map(|p| format!("{:.2},{:.2}", frame.px(p[0]), frame.py(p[1])))
            .collect();
        if !pts.is_empty() {
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                pts.join(" ")
            );
        }
    }
    let (tx, ty) = (frame.px(target[0]), frame.py(target[1]));
    let _ = writeln!(
        svg,
        r##"<circle cx="{tx:.2}" cy="{ty:.2}" r="{:.2}" fill="none" stroke="#444" stroke-dasharray="4 3"/>"##,
        radius * frame.scale()
    );
    let _ = writeln!(svg, r##"<circle cx="{tx:.2}" cy="{ty:.2}" r="3" fill="#444"/>"##);
    let _ = writeln!(
        svg,
        r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="black"/>"##,
        frame.px(0.0),
        frame.py(0.0)
    );
    let entries: Vec<(&str, &str)> = series
        .iter()
        .enumerate()
        .map(|(k, s)| (s.label.as_str(), PALETTE[k % PALETTE.len()]))
        .collect();
    legend(&mut svg, &entries);
    svg.push_str("</svg>\n");
    svg
}

/// Overlay of the TC=0 and TC=1 landing regions over the sweep grid.
pub fn region_svg(title: &str, grid: &SweepGrid) -> String {
    let (a, ad) = (grid.spec.d_alpha, grid.spec.d_alpha_dot);
    let mut svg = String::new();
    open(&mut svg, title);
    let (w, h) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
    let (cw, ch) = (w / ad.steps as f64, h / a.steps as f64);
    const BOTH: &str = "#2ca02c";
    const TC1: &str = "#9ecae1";
    const TC0: &str = "#d62728";
    const NONE: &str = "#f0f0f0";
    for c in &grid.cells {
        let color = match (c.tc0, c.tc1) {
            (true, true) => BOTH,
            (false, true) => TC1,
            (true, false) => TC0,
            (false, false) => NONE,
        };
        let x = MARGIN + c.j as f64 * cw;
        let y = HEIGHT - MARGIN - (c.i + 1) as f64 * ch;
        let _ = writeln!(
            svg,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{cw:.2}" height="{ch:.2}" fill="{color}" stroke="white" stroke-width="0.5"/>"#
        );
    }
    let frac = |ax: &crate::sim::Axis| -ax.min / (ax.max - ax.min);
    let nx = MARGIN + frac(&ad) * w;
    let ny = HEIGHT - MARGIN - frac(&a) * h;
    let _ = writeln!(
        svg,
        r#"<path d="M{:.2},{ny:.2}H{:.2}M{nx:.2},{:.2}V{:.2}" stroke="black" stroke-width="2"/>"#,
        nx - 6.0,
        nx + 6.0,
        ny - 6.0,
        ny + 6.0
    );
    axes(
        &mut svg,
        (ad.min, ad.max),
        (a.min, a.max),
        "release rate offset (rad/s)",
        "release angle offset (rad)",
    );
    legend(
        &mut svg,
        &[
            ("TC=0 and TC=1", BOTH),
            ("TC=1 only", TC1),
            ("TC=0 only", TC0),
            ("neither", NONE),
        ],
    );
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trajectory_plot_is_well_formed() {
        let s = Series::new("a<b", vec![[0.0, 0.0], [1.0, -1.0], [f64::NAN, 0.0]]);
        let svg = trajectory_svg("t", &[s], [1.9, -1.7], 0.05);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("a&lt;b"));
        assert!(!svg.contains("NaN"));
        assert_eq!(svg.matches("<polyline").count(), 1);
    }
}
