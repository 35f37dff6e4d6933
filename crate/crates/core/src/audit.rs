//! Independent re-check of a planned trajectory.
//!
//! Works from the unpacked knots and commands only: it re-integrates every
//! segment with its own loop, tests containment with the winding number
//! (not the smooth surrogate) and checks the corridor and command bounds at
//! every knot, end knots included.

use serde::Serialize;

use crate::constraints::{berth_distance, build_actuator_bounds, speed_limits};
use crate::dynamics::rk4_step;
use crate::geometry::domain_inside;
use crate::transcription::{DecisionVector, OcpSpec};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub max_defect: f64,
    pub initial_error: f64,
    pub terminal_error: f64,
    /// Smallest corridor residual over all knots; `None` when the corridor is
    /// not part of the problem.
    pub min_speed_margin: Option<f64>,
    /// Knots whose ship domain leaves the port polygon.
    pub outside_knots: Vec<usize>,
    /// Largest excursion of a command outside its scaled bounds.
    pub control_violation: f64,
    pub integration_failed: Option<String>,
}

impl AuditReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.integration_failed.is_none()
            && self.max_defect <= tol
            && self.initial_error <= tol
            && self.terminal_error <= tol
            && self.min_speed_margin.is_none_or(|m| m >= -tol)
            && self.outside_knots.is_empty()
            && self.control_violation <= 0.0
    }
}

fn max_abs_diff(a: [f64; 6], b: [f64; 6]) -> f64 {
    a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn audit_trajectory(spec: &OcpSpec, dv: &DecisionVector) -> AuditReport {
    let n = dv.controls.len();
    let dt = dv.tf / n as f64;
    let h = dt / spec.substeps as f64;
    let mut max_defect: f64 = 0.0;
    let mut integration_failed = None;
    let mut act = spec.initial_actuator;
    'segments: for k in 0..n {
        let cmd = dv.controls[k];
        let mut s = dv.states[k];
        for _ in 0..spec.substeps {
            match rk4_step(&s, &act, &cmd, &spec.wind, &spec.ship, h) {
                Ok((s2, a2)) => {
                    s = s2;
                    act = a2;
                }
                Err(e) => {
                    integration_failed = Some(format!("segment {k}: {e}"));
                    break 'segments;
                }
            }
        }
        max_defect = max_defect.max(max_abs_diff(s.to_array(), dv.states[k + 1].to_array()));
    }
    let min_speed_margin = spec.flags.speed_constraint.then(|| {
        dv.states
            .iter()
            .map(|s| {
                let (lo, hi) = speed_limits(berth_distance(s, spec.berth()), &spec.ship, &spec.coeffs);
                (s.u - lo).min(hi - s.u)
            })
            .fold(f64::INFINITY, f64::min)
    });
    let outside_knots = if spec.flags.collision {
        dv.states
            .iter()
            .enumerate()
            .filter(|(_, s)| !domain_inside(s, &spec.port, &spec.ship, spec.domain_vertices).unwrap_or(false))
            .map(|(k, _)| k)
            .collect()
    } else {
        Vec::new()
    };
    let bounds = build_actuator_bounds(&spec.ship).as_array();
    let control_violation = dv
        .controls
        .iter()
        .flat_map(|c| c.to_array().into_iter().zip(bounds))
        .map(|(v, b)| (b.lo - v).max(v - b.hi).max(0.0))
        .fold(0.0, f64::max);

    AuditReport {
        max_defect,
        initial_error: max_abs_diff(dv.states[0].to_array(), spec.x0.to_array()),
        terminal_error: max_abs_diff(dv.states[n].to_array(), spec.xf.to_array()),
        min_speed_margin,
        outside_knots,
        control_violation,
        integration_failed,
    }
}
