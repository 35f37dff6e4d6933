//! Static SVG figures.
//!
//! A run figure has four panels: the path over the port with ship domains,
//! forward speed against the corridor, rudder angles and revolutions. Runs
//! with the corridor are drawn in blue, runs without it in red.

use std::fmt::Write;

use crate::constraints::{berth_distance, speed_limits};
use crate::dynamics::{ActuatorState, State};
use crate::geometry::ship_domain_vertices;
use crate::plan::PlanOutcome;
use crate::transcription::{OcpSpec, Sample};

pub const BLUE: &str = "#1f4fbf";
pub const RED: &str = "#c8302c";
const GREY: &str = "#888888";

/// One trajectory to draw.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub color: &'static str,
    /// Dense samples (time, state, actual actuator).
    pub samples: Vec<(f64, State, ActuatorState)>,
    /// Knot states, used for domain outlines.
    pub knots: Vec<State>,
}

impl Series {
    pub fn from_outcome(outcome: &PlanOutcome, dense: &[Vec<Sample>]) -> Self {
        let constrained = outcome.nlp.spec.flags.speed_constraint;
        Self {
            label: if constrained { "speed reduction" } else { "no speed reduction" }.into(),
            color: if constrained { BLUE } else { RED },
            samples: dense.iter().flatten().map(|s| (s.t, s.state, s.actuator)).collect(),
            knots: outcome.trajectory.states.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    left: f64,
    top: f64,
    width: f64,
    height: f64,
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Panel {
    fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x0) / (self.x1 - self.x0) * self.width
    }

    fn py(&self, y: f64) -> f64 {
        self.top + self.height - (y - self.y0) / (self.y1 - self.y0) * self.height
    }

    fn polyline(&self, svg: &mut String, pts: impl IntoIterator<Item = (f64, f64)>, style: &str) {
        let coords: Vec<String> = pts
            .into_iter()
            .map(|(x, y)| format!("{:.1},{:.1}", self.px(x), self.py(y)))
            .collect();
        let _ = writeln!(svg, r#"<polyline fill="none" {style} points="{}"/>"#, coords.join(" "));
    }

    fn frame(&self, svg: &mut String, title: &str, xlabel: &str, ylabel: &str) {
        let (l, t, w, h) = (self.left, self.top, self.width, self.height);
        let _ = writeln!(svg, r#"<rect x="{l}" y="{t}" width="{w}" height="{h}" fill="none" stroke="black"/>"#);
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{title}</text>"#, l + w / 2.0, t - 8.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle" font-size="11">{xlabel}</text>"#, l + w / 2.0, t + h + 32.0);
        let _ = writeln!(
            svg,
            r#"<text x="{x}" y="{y}" text-anchor="middle" font-size="11" transform="rotate(-90 {x} {y})">{ylabel}</text>"#,
            x = l - 40.0,
            y = t + h / 2.0
        );
        for v in ticks(self.x0, self.x1) {
            let x = self.px(v);
            let _ = writeln!(svg, r#"<line x1="{x:.1}" y1="{}" x2="{x:.1}" y2="{}" stroke="black"/>"#, t + h, t + h + 4.0);
            let _ = writeln!(svg, r#"<text x="{x:.1}" y="{}" text-anchor="middle" font-size="10">{}</text>"#, t + h + 16.0, tick_label(v));
        }
        for v in ticks(self.y0, self.y1) {
            let y = self.py(v);
            let _ = writeln!(svg, r#"<line x1="{}" y1="{y:.1}" x2="{l}" y2="{y:.1}" stroke="black"/>"#, l - 4.0);
            let _ = writeln!(svg, r#"<text x="{}" y="{:.1}" text-anchor="end" font-size="10">{}</text>"#, l - 6.0, y + 3.0, tick_label(v));
        }
    }
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    if !(span > 0.0) || !span.is_finite() {
        return vec![lo];
    }
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= 6.0).unwrap_or(10.0 * mag);
    let mut v = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while v <= hi + 1e-9 * step {
        out.push(if v.abs() < 1e-9 * step { 0.0 } else { v });
        v += step;
    }
    out
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn range(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .into_iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(1e-6);
    (lo - pad, hi + pad)
}

fn document(width: f64, height: f64, body: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n"
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn legend(svg: &mut String, x: f64, y: f64, series: &[Series]) {
    for (i, s) in series.iter().enumerate() {
        let yy = y + 16.0 * i as f64;
        let _ = writeln!(svg, r#"<line x1="{x}" y1="{yy}" x2="{}" y2="{yy}" stroke="{}" stroke-width="2"/>"#, x + 20.0, s.color);
        let _ = writeln!(svg, r#"<text x="{}" y="{}" font-size="11">{}</text>"#, x + 26.0, yy + 4.0, escape(&s.label));
    }
}

fn path_panel(svg: &mut String, p: Panel, series: &[Series], spec: &OcpSpec) {
    let verts = spec.port.vertices();
    let mut outline: Vec<(f64, f64)> = verts.iter().map(|v| (v[0], v[1])).collect();
    outline.push(outline[0]);
    p.polyline(svg, outline, r#"stroke="black" stroke-width="1.5""#);
    for s in series {
        for k in &s.knots {
            if let Ok(dom) = ship_domain_vertices(k, &spec.ship, spec.domain_vertices) {
                let mut ring: Vec<(f64, f64)> = dom.vertices.iter().map(|v| (v[0], v[1])).collect();
                ring.push(ring[0]);
                p.polyline(svg, ring, &format!(r#"stroke="{}" stroke-opacity="0.35""#, s.color));
            }
        }
        p.polyline(svg, s.samples.iter().map(|(_, st, _)| (st.x, st.y)), &format!(r#"stroke="{}" stroke-width="2""#, s.color));
    }
    let b = spec.berth();
    let _ = writeln!(svg, r#"<circle cx="{:.1}" cy="{:.1}" r="4" fill="black"/>"#, p.px(b[0]), p.py(b[1]));
    p.frame(svg, "Trajectory", "x [m]", "y [m]");
}

fn speed_panel(svg: &mut String, p: Panel, series: &[Series], spec: &OcpSpec) {
    let n = 100;
    let curve = |upper: bool| {
        (0..=n).map(move |i| {
            let d = p.x0.max(0.0) + (p.x1 - p.x0.max(0.0)) * i as f64 / n as f64;
            let (lo, hi) = speed_limits(d, &spec.ship, &spec.coeffs);
            (d, if upper { hi } else { lo })
        })
    };
    p.polyline(svg, curve(true), &format!(r#"stroke="{GREY}" stroke-dasharray="6 3""#));
    p.polyline(svg, curve(false), &format!(r#"stroke="{GREY}" stroke-dasharray="2 3""#));
    for s in series {
        p.polyline(
            svg,
            s.samples.iter().map(|(_, st, _)| (berth_distance(st, spec.berth()), st.u)),
            &format!(r#"stroke="{}" stroke-width="2""#, s.color),
        );
    }
    p.frame(svg, "Forward speed and corridor", "distance to berth [m]", "u [m/s]");
}

fn rudder_panel(svg: &mut String, p: Panel, series: &[Series]) {
    for s in series {
        p.polyline(svg, s.samples.iter().map(|(t, _, a)| (*t, a.rudder_port.to_degrees())), &format!(r#"stroke="{}""#, s.color));
        p.polyline(
            svg,
            s.samples.iter().map(|(t, _, a)| (*t, a.rudder_starboard.to_degrees())),
            &format!(r#"stroke="{}" stroke-dasharray="5 3""#, s.color),
        );
    }
    p.frame(svg, "Rudders (solid port, dashed starboard)", "t [s]", "angle [deg]");
}

fn revolution_panel(svg: &mut String, p: Panel, series: &[Series]) {
    for s in series {
        p.polyline(svg, s.samples.iter().map(|(t, _, a)| (*t, a.propeller)), &format!(r#"stroke="{}""#, s.color));
        p.polyline(svg, s.samples.iter().map(|(t, _, a)| (*t, a.thruster)), &format!(r#"stroke="{}" stroke-dasharray="5 3""#, s.color));
    }
    p.frame(svg, "Propeller (solid) and thruster (dashed)", "t [s]", "n [1/s]");
}

fn panel(left: f64, top: f64, width: f64, height: f64, (x0, x1): (f64, f64), (y0, y1): (f64, f64)) -> Panel {
    Panel { left, top, width, height, x0, x1, y0, y1 }
}

/// Four-panel figure for one or more runs of the same scenario.
pub fn run_figure(title: &str, series: &[Series], spec: &OcpSpec) -> String {
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<text x="600" y="24" text-anchor="middle" font-size="16">{}</text>"#, escape(title));

    let (bx0, by0, bx1, by1) = spec.port.bounding_box();
    let (pw, ph) = (500.0, 330.0);
    let (cx, cy, half_x, half_y) = ((bx0 + bx1) / 2.0, (by0 + by1) / 2.0, (bx1 - bx0) / 2.0 * 1.05, (by1 - by0) / 2.0 * 1.05);
    // Equal axis scaling.
    let scale = (half_x / pw).max(half_y / ph);
    let path = panel(70.0, 60.0, pw, ph, (cx - scale * pw, cx + scale * pw), (cy - scale * ph, cy + scale * ph));
    path_panel(&mut svg, path, series, spec);

    let dist = range(series.iter().flat_map(|s| s.samples.iter().map(|(_, st, _)| berth_distance(st, spec.berth()))).chain([0.0]));
    let speeds = range(series.iter().flat_map(|s| s.samples.iter().map(|(_, st, _)| st.u)).chain([0.0, speed_limits(dist.1, &spec.ship, &spec.coeffs).1]));
    speed_panel(&mut svg, panel(660.0, 60.0, pw, ph, (dist.0.max(0.0), dist.1), speeds), series, spec);

    let t = range(series.iter().flat_map(|s| s.samples.iter().map(|(t, _, _)| *t)));
    let t = (t.0.max(0.0), t.1);
    let rud = range(series.iter().flat_map(|s| s.samples.iter().flat_map(|(_, _, a)| [a.rudder_port.to_degrees(), a.rudder_starboard.to_degrees()])));
    rudder_panel(&mut svg, panel(70.0, 460.0, pw, 260.0, t, rud), series);
    let rev = range(series.iter().flat_map(|s| s.samples.iter().flat_map(|(_, _, a)| [a.propeller, a.thruster])));
    revolution_panel(&mut svg, panel(660.0, 460.0, pw, 260.0, t, rev), series);

    legend(&mut svg, 80.0, 780.0, series);
    document(1200.0, 820.0, &svg)
}

/// Cumulative feasibility rate per attempt.
pub fn feasibility_bars(rates: &[f64]) -> String {
    let mut svg = String::new();
    let n = rates.len().max(1) as f64;
    let p = panel(70.0, 50.0, 460.0, 300.0, (0.0, n), (0.0, 100.0));
    let bar = p.width / n * 0.6;
    for (i, r) in rates.iter().enumerate() {
        let x = p.px(i as f64 + 0.5) - bar / 2.0;
        let y = p.py(100.0 * r);
        let _ = writeln!(svg, r#"<rect x="{x:.1}" y="{y:.1}" width="{bar:.1}" height="{:.1}" fill="{BLUE}"/>"#, p.py(0.0) - y);
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="11">{:.1}%</text>"#, x + bar / 2.0, y - 4.0, 100.0 * r);
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="11">{}</text>"#, x + bar / 2.0, p.py(0.0) + 16.0, i + 1);
    }
    let _ = writeln!(svg, r#"<rect x="70" y="50" width="460" height="300" fill="none" stroke="black"/>"#);
    for v in ticks(0.0, 100.0) {
        let _ = writeln!(svg, r#"<text x="64" y="{:.1}" text-anchor="end" font-size="10">{v}</text>"#, p.py(v) + 3.0);
    }
    let _ = writeln!(svg, r#"<text x="300" y="30" text-anchor="middle" font-size="14">Cumulative feasibility by attempt</text>"#);
    let _ = writeln!(svg, r#"<text x="300" y="385" text-anchor="middle" font-size="11">attempt</text>"#);
    let _ = writeln!(svg, r#"<text x="24" y="200" text-anchor="middle" font-size="11" transform="rotate(-90 24 200)">feasible [%]</text>"#);
    document(580.0, 400.0, &svg)
}

/// Compute time against initial distance; feasible cases blue, others red.
pub fn time_vs_distance(points: &[(f64, f64, bool)]) -> String {
    let mut svg = String::new();
    let xr = range(points.iter().map(|p| p.0).chain([0.0]));
    let yr = range(points.iter().map(|p| p.1).chain([0.0]));
    let p = panel(70.0, 50.0, 460.0, 300.0, (xr.0.max(0.0), xr.1), (yr.0.max(0.0), yr.1));
    for &(d, t, ok) in points {
        let _ = writeln!(svg, r#"<circle cx="{:.1}" cy="{:.1}" r="3.5" fill="{}"/>"#, p.px(d), p.py(t), if ok { BLUE } else { RED });
    }
    p.frame(&mut svg, "Computation time", "initial distance to berth [m]", "wall time [s]");
    document(580.0, 400.0, &svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round_and_within_range() {
        assert_eq!(ticks(0.0, 100.0), vec![0.0, 20.0, 40.0, 60.0, 80.0, 100.0]);
        let t = ticks(-0.37, 1.42);
        assert!(t.iter().all(|&v| (-0.37..=1.42).contains(&v)));
        assert!(t.len() >= 3);
    }

    #[test]
    fn bar_chart_is_svg() {
        let s = feasibility_bars(&[0.5, 0.625, 0.75]);
        assert!(s.starts_with("<svg"));
        assert_eq!(s.matches("fill=\"#1f4fbf\"").count(), 3);
    }
}
