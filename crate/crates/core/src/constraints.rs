//! Distance-dependent berthing speed corridor and actuator bounds.

use serde::{Deserialize, Serialize};

use crate::dynamics::{ShipParams, State};
use crate::geometry::Point;

/// Coefficients of one speed-limit curve u_d(d) = c1 d + c2 (1 - exp(-c3 d)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveCoefficients {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl CurveCoefficients {
    /// Nondimensional speed at nondimensional distance `d`.
    pub fn eval(&self, d: f64) -> f64 {
        self.c1 * d + self.c2 * (-(-self.c3 * d).exp_m1())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedLimitCoefficients {
    pub lower: CurveCoefficients,
    pub upper: CurveCoefficients,
}

impl Default for SpeedLimitCoefficients {
    fn default() -> Self {
        Self {
            lower: CurveCoefficients {
                c1: 1.50e-3,
                c2: 1.70e-2,
                c3: 3.78e-1,
            },
            upper: CurveCoefficients {
                c1: 5.06e-3,
                c2: 2.04e-2,
                c3: 1.10,
            },
        }
    }
}

impl SpeedLimitCoefficients {
    /// Names of violated invariants; empty when valid. Dominance of the upper
    /// curve is checked on a grid over d in [0, 100].
    pub fn violations(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        let all = [
            self.lower.c1,
            self.lower.c2,
            self.lower.c3,
            self.upper.c1,
            self.upper.c2,
            self.upper.c3,
        ];
        if !all.iter().all(|c| *c > 0.0 && c.is_finite()) {
            out.push("speed-limit coefficients > 0");
        }
        if (0..=1000).any(|i| {
            let d = i as f64 * 0.1;
            self.upper.eval(d) < self.lower.eval(d)
        }) {
            out.push("upper speed limit >= lower speed limit");
        }
        out
    }
}

/// Dimensional (u_min, u_max) at distance `distance` from the berth.
pub fn speed_limits(distance: f64, params: &ShipParams, coeffs: &SpeedLimitCoefficients) -> (f64, f64) {
    let d = distance / params.particulars.length;
    let usn = params.particulars.nominal_speed;
    (usn * coeffs.lower.eval(d), usn * coeffs.upper.eval(d))
}

/// Euclidean distance from midship to the berth point.
pub fn berth_distance(state: &State, berth: Point) -> f64 {
    (state.x - berth[0]).hypot(state.y - berth[1])
}

/// Per knot (u - u_min, u_max - u). Both non-negative means the corridor holds.
pub fn speed_corridor_residuals(
    states: &[State],
    berth: Point,
    params: &ShipParams,
    coeffs: &SpeedLimitCoefficients,
) -> Vec<(f64, f64)> {
    states
        .iter()
        .map(|s| {
            let (lo, hi) = speed_limits(berth_distance(s, berth), params, coeffs);
            (s.u - lo, hi - s.u)
        })
        .collect()
}

/// Closed interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Self::new(v, v)
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    pub fn is_subset_of(&self, other: &Interval) -> bool {
        self.lo >= other.lo && self.hi <= other.hi
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    fn scaled(&self, k: f64) -> Self {
        Self::new(self.lo * k, self.hi * k)
    }
}

/// Per-channel command intervals after artificial scaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActuatorBounds {
    pub rudder_port: Interval,
    pub rudder_starboard: Interval,
    pub propeller: Interval,
    pub thruster: Interval,
}

impl ActuatorBounds {
    pub fn as_array(&self) -> [Interval; 4] {
        [self.rudder_port, self.rudder_starboard, self.propeller, self.thruster]
    }
}

/// Physical (unscaled) actuator intervals.
pub fn physical_actuator_bounds(params: &ShipParams) -> ActuatorBounds {
    let a = &params.actuators;
    let prop_lo = if a.vectwin { 0.0 } else { -a.propeller_max };
    ActuatorBounds {
        rudder_port: Interval::new(-a.rudder_outboard, a.rudder_inboard),
        rudder_starboard: Interval::new(-a.rudder_inboard, a.rudder_outboard),
        propeller: Interval::new(prop_lo, a.propeller_max),
        thruster: Interval::new(-a.thruster_max, a.thruster_max),
    }
}

/// Scales each physical interval about zero. In fixed-revolution mode the
/// propeller interval collapses to the configured constant.
pub fn build_actuator_bounds(params: &ShipParams) -> ActuatorBounds {
    let a = &params.actuators;
    let phys = physical_actuator_bounds(params);
    ActuatorBounds {
        rudder_port: phys.rudder_port.scaled(a.rudder_scale),
        rudder_starboard: phys.rudder_starboard.scaled(a.rudder_scale),
        propeller: match a.fixed_propeller {
            Some(n) => Interval::point(n),
            None => phys.propeller.scaled(a.propeller_scale),
        },
        thruster: phys.thruster.scaled(a.thruster_scale),
    }
}
