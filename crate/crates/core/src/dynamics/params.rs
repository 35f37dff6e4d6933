//! Ship particulars and force-model coefficients.
//!
//! The default coefficient set ([`ShipParams::ship_a`]) is a plausible set for a
//! 3 m vectwin-rudder model ship. It is not a regression of any tank test and
//! should be replaced by measured values when they are available.

use serde::{Deserialize, Serialize};

/// Mass, inertia and main dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Particulars {
    /// Length between perpendiculars [m].
    pub length: f64,
    /// Breadth [m].
    pub breadth: f64,
    /// Draft [m].
    pub draft: f64,
    /// Displacement mass [kg].
    pub mass: f64,
    /// Surge added mass [kg].
    pub added_mass_x: f64,
    /// Sway added mass [kg].
    pub added_mass_y: f64,
    /// Longitudinal position of the centre of gravity from midship [m].
    pub x_g: f64,
    /// Yaw moment of inertia about the centre of gravity [kg m^2].
    pub inertia_zz: f64,
    /// Added yaw moment of inertia [kg m^2].
    pub added_inertia_zz: f64,
    /// Nominal ship speed used to nondimensionalise speeds [m/s].
    pub nominal_speed: f64,
    /// Operating cap on forward speed [m/s].
    pub speed_cap: f64,
    /// Water density [kg/m^3].
    pub water_density: f64,
}

/// Low-speed hull force model.
///
/// Surge: quadratic resistance plus second-order drift/yaw terms.
/// Sway/yaw: linear derivatives scaled by surge speed plus a cross-flow drag
/// integral over `strips` hull sections, which keeps the model usable at
/// large drift angles and at zero forward speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HullCoefficients {
    /// Wetted surface area [m^2].
    pub wetted_area: f64,
    /// Total resistance coefficient (based on wetted area).
    pub resistance: f64,
    pub x_vv: f64,
    pub x_vr: f64,
    pub x_rr: f64,
    pub y_v: f64,
    pub y_r: f64,
    pub n_v: f64,
    pub n_r: f64,
    /// Sectional cross-flow drag coefficient.
    pub cross_flow_drag: f64,
    /// Number of strips for the cross-flow integral.
    pub strips: usize,
}

/// Fixed-pitch propeller with a quadratic thrust coefficient curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropellerCoefficients {
    /// Diameter [m].
    pub diameter: f64,
    /// Thrust deduction factor.
    pub thrust_deduction: f64,
    /// Effective wake fraction.
    pub wake_fraction: f64,
    /// K_T(J) = kt0 + kt1 J + kt2 J^2.
    pub kt0: f64,
    pub kt1: f64,
    pub kt2: f64,
}

/// Twin (vectwin) rudder pair behind a single propeller.
///
/// Interaction coefficients are applied per rudder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RudderCoefficients {
    /// Area of one rudder [m^2].
    pub area: f64,
    /// Normal-force lift slope f_alpha.
    pub lift_slope: f64,
    /// Longitudinal position of the rudders [m], negative aft.
    pub x_r: f64,
    /// Lateral offset of each rudder from the centreline [m].
    pub y_offset: f64,
    /// Steering resistance deduction.
    pub t_r: f64,
    /// Hull interaction force factor.
    pub a_h: f64,
    /// Longitudinal position of the hull interaction force [m].
    pub x_h: f64,
    /// Wake ratio between propeller and rudder positions.
    pub epsilon: f64,
    /// Slipstream acceleration factor.
    pub kappa: f64,
    /// Ratio of propeller diameter to rudder span.
    pub eta: f64,
    /// Flow-straightening coefficient.
    pub gamma_r: f64,
    /// Effective longitudinal lever of the rudder inflow [m].
    pub inflow_lever: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThrusterCoefficients {
    /// Diameter [m].
    pub diameter: f64,
    /// Thrust coefficient at zero advance.
    pub kt: f64,
    /// Longitudinal arm from midship [m].
    pub x_bt: f64,
}

/// Fourier-series wind load coefficients, angle of attack measured from the bow.
///
/// C_X = cx1 cos g + cx3 cos 3g, C_Y = cy1 sin g + cy3 sin 3g,
/// C_N = cn1 sin g + cn2 sin 2g.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindCoefficients {
    /// Air density [kg/m^3].
    pub air_density: f64,
    /// Frontal projected area [m^2].
    pub frontal_area: f64,
    /// Lateral projected area [m^2].
    pub lateral_area: f64,
    pub cx1: f64,
    pub cx3: f64,
    pub cy1: f64,
    pub cy3: f64,
    pub cn1: f64,
    pub cn2: f64,
}

/// Physical actuator ranges, slew rates and the artificial usage limits.
///
/// Rudder angles use one sign convention for both rudders (positive deflection
/// turns the ship to starboard), so "outboard" is negative for the port rudder
/// and positive for the starboard rudder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuatorLimits {
    /// Maximum outboard deflection of each rudder [rad].
    pub rudder_outboard: f64,
    /// Maximum inboard deflection of each rudder [rad].
    pub rudder_inboard: f64,
    /// Maximum propeller revolutions [1/s].
    pub propeller_max: f64,
    /// Maximum bow-thruster revolutions in either direction [1/s].
    pub thruster_max: f64,
    /// Rudder slew rate [rad/s].
    pub rudder_rate: f64,
    /// Propeller revolution rate [1/s^2].
    pub propeller_rate: f64,
    /// Bow-thruster revolution rate [1/s^2].
    pub thruster_rate: f64,
    pub rudder_scale: f64,
    pub propeller_scale: f64,
    pub thruster_scale: f64,
    /// Vectwin configuration: the propeller only runs ahead.
    pub vectwin: bool,
    /// Constant propeller revolutions when the propeller is not optimised.
    pub fixed_propeller: Option<f64>,
}

/// Speed-dependent ship domain sizing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainParams {
    pub k_a: f64,
    pub k_b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShipParams {
    pub particulars: Particulars,
    pub hull: HullCoefficients,
    pub propeller: PropellerCoefficients,
    pub rudder: RudderCoefficients,
    pub thruster: ThrusterCoefficients,
    pub wind: WindCoefficients,
    pub actuators: ActuatorLimits,
    pub domain: DomainParams,
}

/// A violated parameter invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamViolation {
    /// The invariant, e.g. `m > 0`.
    pub invariant: &'static str,
    /// Offending field path.
    pub field: &'static str,
}

impl std::fmt::Display for ParamViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: invariant `{}` violated", self.field, self.invariant)
    }
}

impl ShipParams {
    /// Default coefficient set for the 3 m twin-rudder model ship.
    pub fn ship_a() -> Self {
        let deg = std::f64::consts::PI / 180.0;
        Self {
            particulars: Particulars {
                length: 3.0,
                breadth: 0.4,
                draft: 0.17,
                mass: 160.0,
                added_mass_x: 8.0,
                added_mass_y: 128.0,
                x_g: 0.05,
                inertia_zz: 90.0,
                added_inertia_zz: 60.0,
                nominal_speed: 7.5,
                speed_cap: 0.75,
                water_density: 1000.0,
            },
            hull: HullCoefficients {
                wetted_area: 2.0,
                resistance: 0.006,
                x_vv: -0.04,
                x_vr: 0.002,
                x_rr: -0.01,
                y_v: -0.3,
                y_r: 0.08,
                n_v: -0.1,
                n_r: -0.05,
                cross_flow_drag: 0.6,
                strips: 20,
            },
            propeller: PropellerCoefficients {
                diameter: 0.12,
                thrust_deduction: 0.2,
                wake_fraction: 0.25,
                kt0: 0.34,
                kt1: -0.35,
                kt2: -0.12,
            },
            rudder: RudderCoefficients {
                area: 0.0165,
                lift_slope: 2.45,
                x_r: -1.5,
                y_offset: 0.06,
                t_r: 0.3,
                a_h: 0.2,
                x_h: -1.35,
                epsilon: 1.0,
                kappa: 0.7,
                eta: 0.9,
                gamma_r: 0.4,
                inflow_lever: -1.35,
            },
            thruster: ThrusterCoefficients {
                diameter: 0.06,
                kt: 0.35,
                x_bt: 1.2,
            },
            wind: WindCoefficients {
                air_density: 1.225,
                frontal_area: 0.12,
                lateral_area: 0.55,
                cx1: -0.6,
                cx3: -0.05,
                cy1: -0.8,
                cy3: -0.05,
                cn1: -0.05,
                cn2: -0.08,
            },
            actuators: ActuatorLimits {
                rudder_outboard: 105.0 * deg,
                rudder_inboard: 35.0 * deg,
                propeller_max: 20.0,
                thruster_max: 20.0,
                rudder_rate: 20.0 * deg,
                propeller_rate: 2.0,
                thruster_rate: 1.0,
                rudder_scale: 0.43,
                propeller_scale: 0.5,
                thruster_scale: 0.75,
                vectwin: true,
                fixed_propeller: Some(10.0),
            },
            domain: DomainParams { k_a: 1.0, k_b: 1.0 },
        }
    }

    /// M_x = m + m_x.
    pub fn mass_x(&self) -> f64 {
        self.particulars.mass + self.particulars.added_mass_x
    }

    /// M_y = m + m_y.
    pub fn mass_y(&self) -> f64 {
        self.particulars.mass + self.particulars.added_mass_y
    }

    /// I_zm = I_zz + J_zz + x_G^2 m.
    pub fn inertia_midship(&self) -> f64 {
        let p = &self.particulars;
        p.inertia_zz + p.added_inertia_zz + p.x_g * p.x_g * p.mass
    }

    /// Determinant of the coupled sway/yaw mass matrix.
    pub fn sway_yaw_determinant(&self) -> f64 {
        let xgm = self.particulars.x_g * self.particulars.mass;
        self.mass_y() * self.inertia_midship() - xgm * xgm
    }

    /// Checks every parameter invariant and returns all violations.
    pub fn validate(&self) -> Result<(), Vec<ParamViolation>> {
        let p = &self.particulars;
        let a = &self.actuators;
        let mut out = Vec::new();
        let mut check = |ok: bool, invariant: &'static str, field: &'static str| {
            if !ok {
                out.push(ParamViolation { invariant, field });
            }
        };
        check(p.mass > 0.0, "m > 0", "particulars.mass");
        check(p.length > 0.0, "L > 0", "particulars.length");
        check(p.breadth > 0.0, "B > 0", "particulars.breadth");
        check(p.draft > 0.0, "d > 0", "particulars.draft");
        check(p.nominal_speed > 0.0, "u_sN > 0", "particulars.nominal_speed");
        check(p.speed_cap > 0.0, "speed_cap > 0", "particulars.speed_cap");
        check(p.water_density > 0.0, "rho > 0", "particulars.water_density");
        check(self.mass_x() > 0.0, "M_x > 0", "particulars.added_mass_x");
        check(self.mass_y() > 0.0, "M_y > 0", "particulars.added_mass_y");
        check(self.inertia_midship() > 0.0, "I_zm > 0", "particulars.inertia_zz");
        check(
            self.sway_yaw_determinant() > 0.0,
            "M_y I_zm - (x_G m)^2 > 0",
            "particulars",
        );
        check(self.hull.strips >= 1, "strips >= 1", "hull.strips");
        check(self.propeller.diameter > 0.0, "D_p > 0", "propeller.diameter");
        check(self.thruster.diameter > 0.0, "D_bt > 0", "thruster.diameter");
        check(self.rudder.area > 0.0, "A_R > 0", "rudder.area");
        for (s, name) in [
            (a.rudder_scale, "actuators.rudder_scale"),
            (a.propeller_scale, "actuators.propeller_scale"),
            (a.thruster_scale, "actuators.thruster_scale"),
        ] {
            check(s > 0.0 && s <= 1.0, "scale in (0, 1]", name);
        }
        check(a.rudder_outboard >= 0.0, "rudder_outboard >= 0", "actuators.rudder_outboard");
        check(a.rudder_inboard >= 0.0, "rudder_inboard >= 0", "actuators.rudder_inboard");
        check(a.propeller_max > 0.0, "propeller_max > 0", "actuators.propeller_max");
        check(a.thruster_max > 0.0, "thruster_max > 0", "actuators.thruster_max");
        check(a.rudder_rate > 0.0, "rudder_rate > 0", "actuators.rudder_rate");
        check(a.propeller_rate > 0.0, "propeller_rate > 0", "actuators.propeller_rate");
        check(a.thruster_rate > 0.0, "thruster_rate > 0", "actuators.thruster_rate");
        if let Some(n) = a.fixed_propeller {
            check(
                n >= 0.0 || !a.vectwin,
                "fixed n_p >= 0 in vectwin mode",
                "actuators.fixed_propeller",
            );
            check(
                n.abs() <= a.propeller_max,
                "|fixed n_p| <= propeller_max",
                "actuators.fixed_propeller",
            );
        }
        check(self.domain.k_a >= 0.0, "k_a >= 0", "domain.k_a");
        check(self.domain.k_b >= 0.0, "k_b >= 0", "domain.k_b");
        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }
}

impl Default for ShipParams {
    fn default() -> Self {
        Self::ship_a()
    }
}
