//! 3-DOF low-speed manoeuvring model of a twin-rudder ship with bow thruster
//! and wind loads.
//!
//! Positions are earth-fixed midship coordinates, velocities are body-fixed at
//! midship. The earth frame has `x` and `y` in the horizontal plane with the
//! heading `psi` measured clockwise from `x` towards `y`.

mod forces;
mod integrate;
mod params;

pub use forces::{
    hull_forces, propeller_forces, rudder_forces, thruster_forces, wind_forces, ForceTriplet,
};
pub use integrate::{actuator_rate_step, body_to_earth_rates, rk4_step, total_derivative};
pub use params::{
    ActuatorLimits, DomainParams, HullCoefficients, ParamViolation, Particulars,
    PropellerCoefficients, RudderCoefficients, ShipParams, ThrusterCoefficients, WindCoefficients,
};

use std::f64::consts::TAU;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("propeller revolutions {0} < 0 are not allowed with a vectwin rudder")]
    ReversePropeller(f64),
    #[error("{rudder} rudder angle {angle_deg:.3} deg outside physical range [{min_deg:.3}, {max_deg:.3}] deg")]
    RudderOutOfRange {
        rudder: &'static str,
        angle_deg: f64,
        min_deg: f64,
        max_deg: f64,
    },
    #[error("non-finite state derivative {0:?}")]
    NonFinite([f64; 6]),
    #[error("time step must be positive, got {0}")]
    BadStep(f64),
}

/// Ship state: earth-fixed midship pose and body-fixed velocities.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State {
    /// Earth-fixed x position [m].
    pub x: f64,
    /// Earth-fixed y position [m].
    pub y: f64,
    /// Heading [rad].
    pub psi: f64,
    /// Surge velocity [m/s].
    pub u: f64,
    /// Sway velocity at midship [m/s].
    pub v: f64,
    /// Yaw rate [rad/s].
    pub r: f64,
}

impl State {
    pub const DIM: usize = 6;

    pub const fn new(x: f64, y: f64, psi: f64, u: f64, v: f64, r: f64) -> Self {
        Self { x, y, psi, u, v, r }
    }

    pub fn to_array(self) -> [f64; 6] {
        [self.x, self.y, self.psi, self.u, self.v, self.r]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4], a[5])
    }

    pub fn from_slice(s: &[f64]) -> Self {
        Self::new(s[0], s[1], s[2], s[3], s[4], s[5])
    }

    /// Resultant speed U.
    pub fn speed(&self) -> f64 {
        self.u.hypot(self.v)
    }

    /// Drift angle, for reporting only.
    pub fn drift_angle(&self) -> f64 {
        (-self.v).atan2(self.u)
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Port/starboard mirror image.
    pub fn mirrored(&self) -> Self {
        Self::new(self.x, -self.y, -self.psi, self.u, -self.v, -self.r)
    }
}

impl Add<[f64; 6]> for State {
    type Output = State;
    fn add(self, rhs: [f64; 6]) -> State {
        let a = self.to_array();
        State::from_array(std::array::from_fn(|i| a[i] + rhs[i]))
    }
}

impl Sub for State {
    type Output = [f64; 6];
    fn sub(self, rhs: State) -> [f64; 6] {
        let a = self.to_array();
        let b = rhs.to_array();
        std::array::from_fn(|i| a[i] - b[i])
    }
}

/// Commanded actuator values, held constant over a shooting segment.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlCommand {
    /// Port rudder angle [rad].
    pub rudder_port: f64,
    /// Starboard rudder angle [rad].
    pub rudder_starboard: f64,
    /// Propeller revolutions [1/s].
    pub propeller: f64,
    /// Bow-thruster revolutions [1/s].
    pub thruster: f64,
}

impl ControlCommand {
    pub const fn new(rudder_port: f64, rudder_starboard: f64, propeller: f64, thruster: f64) -> Self {
        Self {
            rudder_port,
            rudder_starboard,
            propeller,
            thruster,
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.rudder_port, self.rudder_starboard, self.propeller, self.thruster]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    /// Mirror image: rudders swap sides and change sign, thruster reverses.
    pub fn mirrored(&self) -> Self {
        Self::new(-self.rudder_starboard, -self.rudder_port, self.propeller, -self.thruster)
    }
}

/// Actual (rate-limited) actuator values at an instant.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ActuatorState {
    pub rudder_port: f64,
    pub rudder_starboard: f64,
    pub propeller: f64,
    pub thruster: f64,
}

impl ActuatorState {
    pub const fn new(rudder_port: f64, rudder_starboard: f64, propeller: f64, thruster: f64) -> Self {
        Self {
            rudder_port,
            rudder_starboard,
            propeller,
            thruster,
        }
    }

    /// Neutral rudders and thruster with the propeller at `propeller`.
    pub const fn neutral(propeller: f64) -> Self {
        Self::new(0.0, 0.0, propeller, 0.0)
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.rudder_port, self.rudder_starboard, self.propeller, self.thruster]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn mirrored(&self) -> Self {
        Self::new(-self.rudder_starboard, -self.rudder_port, self.propeller, -self.thruster)
    }
}

impl From<ControlCommand> for ActuatorState {
    fn from(c: ControlCommand) -> Self {
        Self::new(c.rudder_port, c.rudder_starboard, c.propeller, c.thruster)
    }
}

/// True wind, frozen for a whole planning horizon.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WindCondition {
    /// True wind speed [m/s].
    speed: f64,
    /// Direction the wind blows from [rad], clockwise from earth x, in [0, 2pi).
    direction: f64,
    /// External time at which the wind was sampled [s].
    sampled_at: f64,
}

impl WindCondition {
    /// Builds a wind condition. Negative speeds are clamped to zero and the
    /// direction is normalised into [0, 2pi).
    pub fn new(speed: f64, direction: f64, sampled_at: f64) -> Self {
        Self {
            speed: speed.max(0.0),
            direction: normalize_angle(direction),
            sampled_at,
        }
    }

    pub fn from_degrees(speed: f64, direction_deg: f64) -> Self {
        Self::new(speed, direction_deg.to_radians(), 0.0)
    }

    pub fn calm() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn direction(&self) -> f64 {
        self.direction
    }

    pub fn sampled_at(&self) -> f64 {
        self.sampled_at
    }

    pub fn mirrored(&self) -> Self {
        Self::new(self.speed, -self.direction, self.sampled_at)
    }
}

/// Wraps an angle into [0, 2pi).
pub fn normalize_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

impl Mul<f64> for ForceTriplet {
    type Output = ForceTriplet;
    fn mul(self, k: f64) -> ForceTriplet {
        ForceTriplet::new(self.x * k, self.y * k, self.n * k)
    }
}
