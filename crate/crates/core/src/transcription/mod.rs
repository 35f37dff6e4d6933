//! Direct multiple-shooting transcription of the berthing problem.
//!
//! Each knot owns one state variable, so continuity between segments is
//! structural. Segment `k` integrates the dynamics from knot `k` under the
//! command stored at knot `k` and is matched against knot `k + 1`.

mod layout;
mod nlp;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::{berth_distance, build_actuator_bounds, speed_limits, SpeedLimitCoefficients};
use crate::dynamics::{
    actuator_rate_step, rk4_step, ActuatorState, ControlCommand, DynamicsError, ShipParams, State,
    WindCondition,
};
use crate::geometry::{
    domain_inside, ship_domain_vertices, signed_distance, winding_number, GeometryError, Point,
    Polygon, DEFAULT_DOMAIN_VERTICES,
};

pub use layout::{DecisionVector, Layout};
pub use nlp::{build_nlp, OcpNlp, RowGroup, RowInfo};

#[derive(Debug, Error)]
pub enum TranscriptionError {
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("{which} state: ship domain is not inside the port polygon")]
    EndpointOutside { which: &'static str },
    #[error("decision vector has {got} entries, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("segment {index}: {source}")]
    Segment {
        index: usize,
        #[source]
        source: DynamicsError,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// How polygon containment enters the NLP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CollisionMode {
    /// One equality per domain vertex: winding angle minus 2π.
    Winding,
    /// One inequality per knot: softmin of vertex signed distances.
    #[default]
    Smooth,
}

/// Combination of the terminal and integral cost factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveMode {
    #[default]
    Product,
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OcpFlags {
    pub speed_constraint: bool,
    pub collision: bool,
    pub collision_mode: CollisionMode,
    pub objective: ObjectiveMode,
}

impl Default for OcpFlags {
    fn default() -> Self {
        Self {
            speed_constraint: true,
            collision: true,
            collision_mode: CollisionMode::Smooth,
            objective: ObjectiveMode::Product,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OcpSpec {
    pub x0: State,
    /// Berth pose; its position is also the reference point for D.
    pub xf: State,
    pub segments: usize,
    pub wind: WindCondition,
    pub ship: ShipParams,
    pub port: Polygon,
    pub coeffs: SpeedLimitCoefficients,
    pub flags: OcpFlags,
    pub tf_bounds: (f64, f64),
    /// RK4 substeps per segment.
    pub substeps: usize,
    pub domain_vertices: usize,
    /// Softmin sharpness of the smooth collision surrogate [1/m].
    pub softmin_sharpness: f64,
    /// Actuator state at t = 0.
    pub initial_actuator: ActuatorState,
}

impl OcpSpec {
    /// Problem with default numerics: M = 4, 16 domain vertices, β = 20 m⁻¹,
    /// t_f in [1, 600] s, actuators neutral at t = 0.
    pub fn new(x0: State, xf: State, segments: usize, wind: WindCondition, ship: ShipParams, port: Polygon) -> Self {
        let n_p = ship.actuators.fixed_propeller.unwrap_or(0.0);
        Self {
            x0,
            xf,
            segments,
            wind,
            ship,
            port,
            coeffs: SpeedLimitCoefficients::default(),
            flags: OcpFlags::default(),
            tf_bounds: (1.0, 600.0),
            substeps: 4,
            domain_vertices: DEFAULT_DOMAIN_VERTICES,
            softmin_sharpness: 20.0,
            initial_actuator: ActuatorState::neutral(n_p),
        }
    }

    pub fn knots(&self) -> usize {
        self.segments + 1
    }

    pub fn berth(&self) -> Point {
        [self.xf.x, self.xf.y]
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self.segments, self.ship.actuators.fixed_propeller)
    }

    /// Structural checks plus endpoint containment.
    pub fn validate(&self) -> Result<(), TranscriptionError> {
        let bad = |m: &str| Err(TranscriptionError::Invalid(m.to_string()));
        if self.segments < 2 {
            return bad("N_s >= 2");
        }
        let (lo, hi) = self.tf_bounds;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return bad("0 < tf_min <= tf_max < inf");
        }
        if self.substeps == 0 {
            return bad("substeps >= 1");
        }
        if self.domain_vertices < 8 {
            return bad("domain vertices >= 8");
        }
        if !(self.softmin_sharpness > 0.0 && self.softmin_sharpness.is_finite()) {
            return bad("softmin sharpness > 0");
        }
        if !self.x0.is_finite() || !self.xf.is_finite() {
            return bad("endpoint states must be finite");
        }
        if let Err(v) = self.ship.validate() {
            let names: Vec<String> = v.iter().map(ToString::to_string).collect();
            return Err(TranscriptionError::Invalid(names.join("; ")));
        }
        if !self.coeffs.violations().is_empty() {
            return Err(TranscriptionError::Invalid(self.coeffs.violations().join("; ")));
        }
        for (which, s) in [("initial", &self.x0), ("terminal", &self.xf)] {
            if !domain_inside(s, &self.port, &self.ship, self.domain_vertices)? {
                return Err(TranscriptionError::EndpointOutside { which });
            }
        }
        Ok(())
    }

    /// Objective weights nondimensionalising (x, y, ψ, u, v, r).
    pub fn weights(&self) -> [f64; 6] {
        let l = self.ship.particulars.length;
        let us = self.ship.particulars.nominal_speed;
        let w = [l, l, PI, us, us, us / l];
        w.map(|s| 1.0 / (s * s))
    }
}

/// Actuator state at the start of every segment plus the final one.
pub fn actuator_chain(spec: &OcpSpec, dt: f64, controls: &[ControlCommand]) -> Vec<ActuatorState> {
    let h = dt / spec.substeps as f64;
    let mut out = Vec::with_capacity(controls.len() + 1);
    let mut a = spec.initial_actuator;
    out.push(a);
    for cmd in controls {
        for _ in 0..spec.substeps {
            a = actuator_rate_step(&a, cmd, h, &spec.ship);
        }
        out.push(a);
    }
    out
}

/// One sample inside a segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub state: State,
    pub actuator: ActuatorState,
    pub command: ControlCommand,
}

/// Integrates one segment with the command held constant. Returns the
/// substep samples including both ends.
pub fn propagate_segment(
    spec: &OcpSpec,
    t0: f64,
    dt: f64,
    start: State,
    actuator: ActuatorState,
    command: &ControlCommand,
) -> Result<Vec<Sample>, DynamicsError> {
    let h = dt / spec.substeps as f64;
    let mut s = start;
    let mut a = actuator;
    let mut out = Vec::with_capacity(spec.substeps + 1);
    out.push(Sample { t: t0, state: s, actuator: a, command: *command });
    for j in 0..spec.substeps {
        (s, a) = rk4_step(&s, &a, command, &spec.wind, &spec.ship, h)?;
        out.push(Sample {
            t: t0 + h * (j + 1) as f64,
            state: s,
            actuator: a,
            command: *command,
        });
    }
    Ok(out)
}

fn segment_end(
    spec: &OcpSpec,
    dt: f64,
    start: State,
    actuator: ActuatorState,
    command: &ControlCommand,
) -> Result<State, DynamicsError> {
    let h = dt / spec.substeps as f64;
    let mut s = start;
    let mut a = actuator;
    for _ in 0..spec.substeps {
        (s, a) = rk4_step(&s, &a, command, &spec.wind, &spec.ship, h)?;
    }
    Ok(s)
}

/// Forward simulation from x0 under `controls`; returns all knot states.
pub fn simulate_knots(spec: &OcpSpec, tf: f64, controls: &[ControlCommand]) -> Result<Vec<State>, TranscriptionError> {
    let dt = tf / controls.len() as f64;
    let acts = actuator_chain(spec, dt, controls);
    let mut states = vec![spec.x0];
    for (k, cmd) in controls.iter().enumerate() {
        let next = segment_end(spec, dt, states[k], acts[k], cmd)
            .map_err(|source| TranscriptionError::Segment { index: k, source })?;
        states.push(next);
    }
    Ok(states)
}

/// Dense trajectory at RK4 substep resolution.
pub fn dense_trajectory(spec: &OcpSpec, dv: &DecisionVector) -> Result<Vec<Vec<Sample>>, TranscriptionError> {
    let dt = dv.tf / spec.segments as f64;
    let acts = actuator_chain(spec, dt, &dv.controls);
    dv.controls
        .iter()
        .enumerate()
        .map(|(k, cmd)| {
            propagate_segment(spec, k as f64 * dt, dt, dv.states[k], acts[k], cmd)
                .map_err(|source| TranscriptionError::Segment { index: k, source })
        })
        .collect()
}

fn weighted_error(s: &State, xf: &State, w: &[f64; 6]) -> f64 {
    let e = *s - *xf;
    e.iter().zip(w).map(|(e, w)| w * e * e).sum()
}

/// Terminal factor and trapezoid integral factor of the cost.
pub fn cost_factors(dv: &DecisionVector, spec: &OcpSpec) -> (f64, f64) {
    let w = spec.weights();
    let errs: Vec<f64> = dv.states.iter().map(|s| weighted_error(s, &spec.xf, &w)).collect();
    let dt = dv.tf / spec.segments as f64;
    let n = errs.len();
    let inner: f64 = errs[1..n - 1].iter().sum();
    let integral = dt * (0.5 * (errs[0] + errs[n - 1]) + inner);
    (errs[n - 1], integral)
}

pub fn objective(dv: &DecisionVector, spec: &OcpSpec) -> f64 {
    let (terminal, integral) = cost_factors(dv, spec);
    match spec.flags.objective {
        ObjectiveMode::Product => terminal * integral,
        ObjectiveMode::Sum => terminal + integral,
    }
}

/// `x_{k+1} - x_T(t_{k+1})` for every segment, six entries each.
pub fn defect_constraints(dv: &DecisionVector, spec: &OcpSpec) -> Result<Vec<f64>, TranscriptionError> {
    let dt = dv.tf / spec.segments as f64;
    let acts = actuator_chain(spec, dt, &dv.controls);
    let mut out = Vec::with_capacity(6 * spec.segments);
    for (k, cmd) in dv.controls.iter().enumerate() {
        let end = segment_end(spec, dt, dv.states[k], acts[k], cmd)
            .map_err(|source| TranscriptionError::Segment { index: k, source })?;
        out.extend(dv.states[k + 1] - end);
    }
    Ok(out)
}

/// `x_1 - x0` followed by `x_{N_k} - xf`.
pub fn boundary_constraints(dv: &DecisionVector, spec: &OcpSpec) -> Vec<f64> {
    let mut out = Vec::with_capacity(12);
    out.extend(dv.states[0] - spec.x0);
    out.extend(*dv.states.last().expect("at least two knots") - spec.xf);
    out
}

/// Softmin of per-vertex signed distances; never above the true minimum.
pub fn softmin(values: &[f64], beta: f64) -> f64 {
    let m = values.iter().copied().fold(f64::INFINITY, f64::min);
    let s: f64 = values.iter().map(|v| (-beta * (v - m)).exp()).sum();
    m - s.ln() / beta
}

/// Smooth collision residual of one knot (>= 0 keeps the domain inside).
pub fn collision_surrogate(state: &State, spec: &OcpSpec) -> Result<f64, GeometryError> {
    let dom = ship_domain_vertices(state, &spec.ship, spec.domain_vertices)?;
    let d: Vec<f64> = dom.vertices.iter().map(|&q| signed_distance(q, &spec.port)).collect();
    Ok(softmin(&d, spec.softmin_sharpness))
}

/// Winding residuals of one knot, one per domain vertex.
pub fn collision_winding(state: &State, spec: &OcpSpec) -> Result<Vec<f64>, GeometryError> {
    let dom = ship_domain_vertices(state, &spec.ship, spec.domain_vertices)?;
    Ok(dom
        .vertices
        .iter()
        .map(|&q| winding_number(q, &spec.port).angle_or_outside() - 2.0 * PI)
        .collect())
}

/// Path-constraint residuals at the given knots.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PathResiduals {
    /// (u - u_min, u_max - u) per knot, when the corridor is enabled.
    pub speed: Vec<(f64, f64)>,
    /// Smooth mode: one inequality per knot.
    pub surrogate: Vec<f64>,
    /// Winding mode: one equality per knot and vertex.
    pub winding: Vec<f64>,
}

pub fn path_constraints(
    states: &[State],
    spec: &OcpSpec,
) -> Result<PathResiduals, GeometryError> {
    let mut out = PathResiduals::default();
    let berth = spec.berth();
    for s in states {
        if spec.flags.speed_constraint {
            let (lo, hi) = speed_limits(berth_distance(s, berth), &spec.ship, &spec.coeffs);
            out.speed.push((s.u - lo, hi - s.u));
        }
        if spec.flags.collision {
            match spec.flags.collision_mode {
                CollisionMode::Smooth => out.surrogate.push(collision_surrogate(s, spec)?),
                CollisionMode::Winding => out.winding.extend(collision_winding(s, spec)?),
            }
        }
    }
    Ok(out)
}

/// Linear interpolation between x0 and xf; commands at the middle of their
/// bounds, which is zero for symmetric ranges.
pub fn linear_initial_guess(spec: &OcpSpec, tf_guess: f64) -> Result<DecisionVector, TranscriptionError> {
    if !(tf_guess > 0.0 && tf_guess.is_finite()) {
        return Err(TranscriptionError::Invalid("tf_guess > 0".into()));
    }
    let n = spec.segments;
    let a = spec.x0.to_array();
    let b = spec.xf.to_array();
    let states = (0..=n)
        .map(|k| {
            let t = k as f64 / n as f64;
            let mut s = [0.0; 6];
            for i in 0..6 {
                s[i] = a[i] + t * (b[i] - a[i]);
            }
            if k == n {
                s = b;
            }
            State::from_array(s)
        })
        .collect();
    let mid = build_actuator_bounds(&spec.ship).as_array().map(|b| b.mid());
    let controls = vec![ControlCommand::from_array(mid); n];
    Ok(DecisionVector {
        tf: tf_guess,
        states,
        controls,
    })
}

/// Final-time guess: twice the straight-line distance at the initial speed.
pub fn default_tf_guess(spec: &OcpSpec) -> f64 {
    let d = berth_distance(&spec.x0, spec.berth());
    let u = spec.x0.speed().max(0.1 * spec.ship.particulars.speed_cap);
    (2.0 * d / u).clamp(spec.tf_bounds.0, spec.tf_bounds.1)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn test_port() -> Polygon {
        Polygon::closing(vec![[-10.0, -10.0], [80.0, -10.0], [80.0, 20.0], [-10.0, 20.0]]).unwrap()
    }

    pub(crate) fn test_spec(segments: usize) -> OcpSpec {
        OcpSpec::new(
            State::new(60.0, 0.0, PI, 0.74, 0.0, 0.0),
            State::new(0.0, 0.0, PI, 0.0, 0.0, 0.0),
            segments,
            WindCondition::from_degrees(1.0, 0.0),
            ShipParams::ship_a(),
            test_port(),
        )
    }

    fn constant_trajectory(spec: &OcpSpec, s: State, tf: f64) -> DecisionVector {
        DecisionVector {
            tf,
            states: vec![s; spec.knots()],
            controls: vec![ControlCommand::new(0.0, 0.0, 10.0, 0.0); spec.segments],
        }
    }

    #[test]
    fn objective_zero_at_target() {
        let spec = test_spec(6);
        let dv = constant_trajectory(&spec, spec.xf, 50.0);
        assert_eq!(objective(&dv, &spec), 0.0);
    }

    #[test]
    fn constant_error_closed_form() {
        let spec = test_spec(6);
        let s = State::new(3.0, 0.0, PI, 0.0, 0.0, 0.0);
        let e2 = 1.0; // (3 / L)^2 with L = 3.
        let dv = constant_trajectory(&spec, s, 40.0);
        let j = objective(&dv, &spec);
        assert!((j - e2 * e2 * 40.0).abs() < 1e-12);
        let dv2 = constant_trajectory(&spec, s, 80.0);
        assert!((objective(&dv2, &spec) - 2.0 * j).abs() < 1e-12);
    }

    #[test]
    fn sum_mode() {
        let mut spec = test_spec(4);
        spec.flags.objective = ObjectiveMode::Sum;
        let dv = constant_trajectory(&spec, State::new(3.0, 0.0, PI, 0.0, 0.0, 0.0), 10.0);
        assert!((objective(&dv, &spec) - 11.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_shift() {
        let mut spec = test_spec(3);
        let dv = constant_trajectory(&spec, spec.xf, 10.0);
        spec.x0 = spec.xf;
        assert!(boundary_constraints(&dv, &spec).iter().all(|r| *r == 0.0));
        spec.xf.x += 1.0;
        let r = boundary_constraints(&dv, &spec);
        assert_eq!(r.len(), 12);
        assert_eq!(&r[6..], &[-1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn simulated_witness_has_zero_defects() {
        let spec = test_spec(5);
        let controls = vec![ControlCommand::new(-0.3, 0.2, 10.0, 4.0); 5];
        let states = simulate_knots(&spec, 40.0, &controls).unwrap();
        let dv = DecisionVector {
            tf: 40.0,
            states,
            controls,
        };
        let d = defect_constraints(&dv, &spec).unwrap();
        assert_eq!(d.len(), 30);
        assert!(d.iter().all(|v| v.abs() <= 1e-10));
    }

    #[test]
    fn perturbing_a_knot_touches_two_segments() {
        let spec = test_spec(5);
        let controls = vec![ControlCommand::new(-0.3, 0.2, 10.0, 4.0); 5];
        let states = simulate_knots(&spec, 40.0, &controls).unwrap();
        let mut dv = DecisionVector {
            tf: 40.0,
            states,
            controls,
        };
        let base = defect_constraints(&dv, &spec).unwrap();
        dv.states[2].y += 1e-3;
        let pert = defect_constraints(&dv, &spec).unwrap();
        let changed: Vec<usize> = (0..5)
            .filter(|&k| (0..6).any(|i| base[6 * k + i] != pert[6 * k + i]))
            .collect();
        assert_eq!(changed, vec![1, 2]);
    }

    #[test]
    fn guess_endpoints_and_midpoint() {
        let spec = test_spec(6);
        let g = linear_initial_guess(&spec, 100.0).unwrap();
        assert_eq!(g.states[0], spec.x0);
        assert_eq!(g.states[6], spec.xf);
        let mid = g.states[3].to_array();
        let a = spec.x0.to_array();
        let b = spec.xf.to_array();
        for i in 0..6 {
            assert!((mid[i] - 0.5 * (a[i] + b[i])).abs() < 1e-12);
        }
        let b = build_actuator_bounds(&spec.ship);
        for c in &g.controls {
            assert_eq!(c.thruster, 0.0);
            assert!((c.rudder_port + 15.05f64.to_radians()).abs() < 1e-12);
            assert_eq!(c.rudder_starboard, -c.rudder_port);
            assert!(b.rudder_port.contains(c.rudder_port) && b.rudder_starboard.contains(c.rudder_starboard));
        }
        assert!(linear_initial_guess(&spec, 0.0).is_err());
    }

    #[test]
    fn exterior_knot_violates_both_forms() {
        let spec = test_spec(3);
        let out = State::new(200.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert!(collision_surrogate(&out, &spec).unwrap() < 0.0);
        let w = collision_winding(&out, &spec).unwrap();
        assert!(w.iter().all(|r| (r + 2.0 * PI).abs() < 1e-9));
        let inside = State::new(30.0, 0.0, 0.0, 0.3, 0.0, 0.0);
        assert!(collision_surrogate(&inside, &spec).unwrap() > 0.0);
        assert!(collision_winding(&inside, &spec).unwrap().iter().all(|r| r.abs() < 1e-9));
    }

    #[test]
    fn softmin_is_a_lower_bound() {
        let v = [3.0, 1.0, 2.0];
        let s = softmin(&v, 20.0);
        assert!(s <= 1.0 && s > 1.0 - (3.0f64).ln() / 20.0 - 1e-12);
    }

    #[test]
    fn validate_rejects_outside_endpoint() {
        let mut spec = test_spec(3);
        spec.x0.x = 500.0;
        assert!(matches!(
            spec.validate(),
            Err(TranscriptionError::EndpointOutside { which: "initial" })
        ));
        let mut spec = test_spec(1);
        spec.segments = 1;
        assert!(spec.validate().is_err());
    }
}
