//! Force components of the manoeuvring model.
//!
//! Body axes: x forward, y to starboard, moments positive clockwise seen from
//! above. All forces act about midship.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Neg};

use serde::{Deserialize, Serialize};

use super::{ActuatorState, DynamicsError, ShipParams, State, WindCondition};

/// Surge force, sway force and yaw moment about midship.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ForceTriplet {
    /// Surge force [N].
    pub x: f64,
    /// Sway force [N].
    pub y: f64,
    /// Yaw moment about midship [N m].
    pub n: f64,
}

impl ForceTriplet {
    pub const ZERO: ForceTriplet = ForceTriplet { x: 0.0, y: 0.0, n: 0.0 };

    pub const fn new(x: f64, y: f64, n: f64) -> Self {
        Self { x, y, n }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.n.is_finite()
    }
}

impl Add for ForceTriplet {
    type Output = ForceTriplet;
    fn add(self, o: ForceTriplet) -> ForceTriplet {
        ForceTriplet::new(self.x + o.x, self.y + o.y, self.n + o.n)
    }
}

impl AddAssign for ForceTriplet {
    fn add_assign(&mut self, o: ForceTriplet) {
        *self = *self + o;
    }
}

impl Neg for ForceTriplet {
    type Output = ForceTriplet;
    fn neg(self) -> ForceTriplet {
        ForceTriplet::new(-self.x, -self.y, -self.n)
    }
}

/// Advance ratios outside this interval are clamped before evaluating K_T, so
/// that thrust stays bounded as the revolutions approach zero.
const ADVANCE_RATIO_RANGE: (f64, f64) = (-1.0, 1.2);

/// Low-speed hull forces with a strip-wise cross-flow drag term.
pub fn hull_forces(state: &State, params: &ShipParams) -> ForceTriplet {
    let p = &params.particulars;
    let h = &params.hull;
    let (u, v, r) = (state.u, state.v, state.r);
    let l = p.length;
    let half_rho = 0.5 * p.water_density;
    let q_lat = half_rho * l * p.draft;

    let x = -half_rho * h.wetted_area * h.resistance * u * u.abs()
        + q_lat * (h.x_vv * v * v + h.x_vr * v * r * l + h.x_rr * r * r * l * l);
    let mut y = q_lat * (h.y_v * u.abs() * v + h.y_r * u * r * l);
    let mut n = q_lat * l * (h.n_v * u * v + h.n_r * u.abs() * r * l);

    // Cross-flow drag, midpoint rule over the hull length.
    let strips = h.strips.max(1);
    let dx = l / strips as f64;
    let k = -half_rho * p.draft * h.cross_flow_drag * dx;
    for i in 0..strips {
        let xi = -0.5 * l + (i as f64 + 0.5) * dx;
        let vl = v + xi * r;
        let f = k * vl * vl.abs();
        y += f;
        n += xi * f;
    }
    ForceTriplet::new(x, y, n)
}

fn thrust_coefficient(params: &ShipParams, advance: f64) -> f64 {
    let c = &params.propeller;
    let j = advance.clamp(ADVANCE_RATIO_RANGE.0, ADVANCE_RATIO_RANGE.1);
    c.kt0 + c.kt1 * j + c.kt2 * j * j
}

/// Propeller thrust. Only ahead revolutions are accepted in vectwin mode.
pub fn propeller_forces(
    state: &State,
    n_p: f64,
    params: &ShipParams,
) -> Result<ForceTriplet, DynamicsError> {
    if params.actuators.vectwin && n_p < 0.0 {
        return Err(DynamicsError::ReversePropeller(n_p));
    }
    if n_p == 0.0 {
        return Ok(ForceTriplet::ZERO);
    }
    let c = &params.propeller;
    let u_p = state.u * (1.0 - c.wake_fraction);
    let j = u_p / (n_p.abs() * c.diameter);
    let kt = thrust_coefficient(params, j);
    let thrust = (1.0 - c.thrust_deduction)
        * params.particulars.water_density
        * n_p
        * n_p.abs()
        * c.diameter.powi(4)
        * kt;
    Ok(ForceTriplet::new(thrust, 0.0, 0.0))
}

/// Checks both rudder angles against their physical ranges.
pub fn check_rudder_range(act: &ActuatorState, params: &ShipParams) -> Result<(), DynamicsError> {
    // Slack absorbs rounding from unit conversion of configured bounds.
    const SLACK: f64 = 1e-12;
    let a = &params.actuators;
    let ranges = [
        ("port", act.rudder_port, -a.rudder_outboard, a.rudder_inboard),
        ("starboard", act.rudder_starboard, -a.rudder_inboard, a.rudder_outboard),
    ];
    for (rudder, angle, lo, hi) in ranges {
        if !(angle >= lo - SLACK && angle <= hi + SLACK) {
            return Err(DynamicsError::RudderOutOfRange {
                rudder,
                angle_deg: angle.to_degrees(),
                min_deg: lo.to_degrees(),
                max_deg: hi.to_degrees(),
            });
        }
    }
    Ok(())
}

/// Forces of the twin rudders in the propeller slipstream, summed.
///
/// `propeller_thrust` is the effective thrust returned by
/// [`propeller_forces`]; it sets the slipstream velocity.
pub fn rudder_forces(
    state: &State,
    act: &ActuatorState,
    propeller_thrust: f64,
    params: &ShipParams,
) -> Result<ForceTriplet, DynamicsError> {
    check_rudder_range(act, params)?;
    let c = &params.rudder;
    let pc = &params.propeller;
    let rho = params.particulars.water_density;

    let u_p = state.u * (1.0 - pc.wake_fraction);
    // K_T n^2 D^2 recovered from the effective thrust.
    let kt_n2_d2 = propeller_thrust / ((1.0 - pc.thrust_deduction) * rho * pc.diameter.powi(2));
    let slip = (u_p * u_p + 8.0 * kt_n2_d2 / PI).max(0.0).sqrt();
    let accel = u_p + c.kappa * (slip - u_p);
    let u_r = c.epsilon * (c.eta * accel * accel + (1.0 - c.eta) * u_p * u_p).sqrt();
    let v_r = -c.gamma_r * (state.v + c.inflow_lever * state.r);
    let speed_sq = u_r * u_r + v_r * v_r;
    let inflow = v_r.atan2(u_r);

    let mut total = ForceTriplet::ZERO;
    for (delta, y_i) in [(act.rudder_port, -c.y_offset), (act.rudder_starboard, c.y_offset)] {
        let alpha = delta - inflow;
        let normal = 0.5 * rho * c.area * c.lift_slope * speed_sq * alpha.sin();
        let fx = -(1.0 - c.t_r) * normal * delta.sin();
        let fy = -(1.0 + c.a_h) * normal * delta.cos();
        let nz = -(c.x_r + c.a_h * c.x_h) * normal * delta.cos() - y_i * fx;
        total += ForceTriplet::new(fx, fy, nz);
    }
    Ok(total)
}

/// Bow-thruster force. Positive revolutions push the bow to starboard.
pub fn thruster_forces(n_bt: f64, params: &ShipParams) -> ForceTriplet {
    let t = &params.thruster;
    let y = params.particulars.water_density * t.diameter.powi(4) * t.kt * n_bt * n_bt.abs();
    ForceTriplet::new(0.0, y, t.x_bt * y)
}

/// Wind loads from the apparent wind.
pub fn wind_forces(state: &State, wind: &WindCondition, params: &ShipParams) -> ForceTriplet {
    let w = &params.wind;
    let (s, c) = state.psi.sin_cos();
    // Earth-frame air velocity; the wind comes from `direction`.
    let (gs, gc) = wind.direction().sin_cos();
    let (wx, wy) = (-wind.speed() * gc, -wind.speed() * gs);
    // Air velocity relative to the ship, body frame.
    let ax = c * wx + s * wy - state.u;
    let ay = -s * wx + c * wy - state.v;
    let ua_sq = ax * ax + ay * ay;
    if ua_sq == 0.0 {
        return ForceTriplet::ZERO;
    }
    let gamma = (-ay).atan2(-ax);
    let cx = w.cx1 * gamma.cos() + w.cx3 * (3.0 * gamma).cos();
    let cy = w.cy1 * gamma.sin() + w.cy3 * (3.0 * gamma).sin();
    let cn = w.cn1 * gamma.sin() + w.cn2 * (2.0 * gamma).sin();
    let q = 0.5 * w.air_density * ua_sq;
    ForceTriplet::new(
        q * w.frontal_area * cx,
        q * w.lateral_area * cy,
        q * w.lateral_area * params.particulars.length * cn,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ship() -> ShipParams {
        ShipParams::ship_a()
    }

    #[test]
    fn hull_zero_at_rest() {
        assert_eq!(hull_forces(&State::default(), &ship()), ForceTriplet::ZERO);
    }

    #[test]
    fn hull_pure_surge_is_resistance() {
        let f = hull_forces(&State::new(0.0, 0.0, 0.0, 0.5, 0.0, 0.0), &ship());
        assert!(f.x < 0.0);
        assert_eq!(f.y, 0.0);
        assert_eq!(f.n, 0.0);
    }

    #[test]
    fn hull_mirror() {
        let s = State::new(0.0, 0.0, 0.0, 0.4, 0.07, -0.03);
        let a = hull_forces(&s, &ship());
        let b = hull_forces(&s.mirrored(), &ship());
        assert_eq!(a.x, b.x);
        assert_eq!(a.y, -b.y);
        assert_eq!(a.n, -b.n);
    }

    #[test]
    fn cross_flow_matches_closed_form_for_pure_sway() {
        // With r = 0 every strip sees the same velocity, so the sum is exact.
        let p = ship();
        let mut no_lin = p.clone();
        no_lin.hull.y_v = 0.0;
        no_lin.hull.y_r = 0.0;
        let v = 0.2;
        let f = hull_forces(&State::new(0.0, 0.0, 0.0, 0.0, v, 0.0), &no_lin);
        let expect = -0.5 * 1000.0 * 0.17 * 0.6 * 3.0 * v * v;
        assert!((f.y - expect).abs() < 1e-12 * expect.abs());
    }

    #[test]
    fn propeller_zero_and_reverse() {
        let p = ship();
        let s = State::default();
        assert_eq!(propeller_forces(&s, 0.0, &p).unwrap(), ForceTriplet::ZERO);
        assert!(matches!(
            propeller_forces(&s, -1.0, &p),
            Err(DynamicsError::ReversePropeller(_))
        ));
        let mut ship_b = p.clone();
        ship_b.actuators.vectwin = false;
        let astern = propeller_forces(&s, -5.0, &ship_b).unwrap();
        assert!(astern.x < 0.0);
    }

    #[test]
    fn propeller_bollard_and_monotone() {
        let p = ship();
        let mut last = f64::INFINITY;
        for i in 0..=75 {
            let u = i as f64 * 0.01;
            let t = propeller_forces(&State::new(0.0, 0.0, 0.0, u, 0.0, 0.0), 10.0, &p)
                .unwrap()
                .x;
            if i == 0 {
                assert!(t > 0.0);
            }
            assert!(t < last);
            last = t;
        }
    }

    #[test]
    fn rudders_neutral_give_no_side_force() {
        let p = ship();
        let s = State::new(0.0, 0.0, 0.0, 0.5, 0.0, 0.0);
        let f = rudder_forces(&s, &ActuatorState::neutral(10.0), 5.0, &p).unwrap();
        assert_eq!(f.y, 0.0);
        assert_eq!(f.n, 0.0);
    }

    #[test]
    fn rudder_braking_configuration() {
        let p = ship();
        let s = State::new(0.0, 0.0, 0.0, 0.4, 0.0, 0.0);
        let out = 40f64.to_radians();
        let f = rudder_forces(&s, &ActuatorState::new(-out, out, 10.0, 0.0), 5.0, &p).unwrap();
        assert!(f.x < 0.0);
        assert!(f.y.abs() < 1e-12);
        let inward = 10f64.to_radians();
        let g = rudder_forces(&s, &ActuatorState::new(inward, -inward, 10.0, 0.0), 5.0, &p)
            .unwrap();
        assert!(g.x < 0.0);
    }

    #[test]
    fn rudder_mirror() {
        let p = ship();
        let s = State::new(0.0, 0.0, 0.0, 0.3, 0.05, 0.02);
        let a = ActuatorState::new(-0.3, 0.6, 10.0, 0.0);
        let f = rudder_forces(&s, &a, 4.0, &p).unwrap();
        let g = rudder_forces(&s.mirrored(), &a.mirrored(), 4.0, &p).unwrap();
        assert!((f.x - g.x).abs() < 1e-14);
        assert!((f.y + g.y).abs() < 1e-14);
        assert!((f.n + g.n).abs() < 1e-14);
    }

    #[test]
    fn rudder_range_rejected() {
        let p = ship();
        let bad = ActuatorState::new(-110f64.to_radians(), 0.0, 10.0, 0.0);
        assert!(rudder_forces(&State::default(), &bad, 0.0, &p).is_err());
        let bad_in = ActuatorState::new(0.0, -36f64.to_radians(), 10.0, 0.0);
        assert!(rudder_forces(&State::default(), &bad_in, 0.0, &p).is_err());
    }

    #[test]
    fn thruster_odd_with_arm() {
        let p = ship();
        assert_eq!(thruster_forces(0.0, &p), ForceTriplet::ZERO);
        let a = thruster_forces(7.0, &p);
        let b = thruster_forces(-7.0, &p);
        assert_eq!(a, -b);
        assert_eq!(a.x, 0.0);
        assert!((a.n / a.y - p.thruster.x_bt).abs() < 1e-15);
    }

    #[test]
    fn wind_cases() {
        let p = ship();
        let rest = State::default();
        assert_eq!(wind_forces(&rest, &WindCondition::calm(), &p), ForceTriplet::ZERO);
        let head = wind_forces(&rest, &WindCondition::from_degrees(1.0, 0.0), &p);
        assert!(head.x < 0.0);
        assert!(head.y.abs() < 1e-15 && head.n.abs() < 1e-15);
        let beam = wind_forces(&rest, &WindCondition::from_degrees(1.0, 90.0), &p);
        assert!(beam.y.abs() > beam.x.abs());
        // Wind from starboard pushes the ship to port.
        assert!(beam.y < 0.0);
    }

    #[test]
    fn forward_speed_in_calm_is_head_wind() {
        let p = ship();
        let f = wind_forces(&State::new(0.0, 0.0, 0.7, 0.5, 0.0, 0.0), &WindCondition::calm(), &p);
        assert!(f.x < 0.0);
        assert!(f.y.abs() < 1e-15);
    }
}
