//! Acceleration solve, actuator slew model and RK4 stepping.

use super::forces::{hull_forces, propeller_forces, rudder_forces, thruster_forces, wind_forces};
use super::{ActuatorState, ControlCommand, DynamicsError, ShipParams, State, WindCondition};

/// Earth-fixed pose rates (x0_dot, y0_dot, psi_dot).
pub fn body_to_earth_rates(state: &State) -> (f64, f64, f64) {
    let (s, c) = state.psi.sin_cos();
    (
        state.u * c - state.v * s,
        state.u * s + state.v * c,
        state.r,
    )
}

/// Full state derivative for a frozen actuator state and wind.
pub fn total_derivative(
    state: &State,
    act: &ActuatorState,
    wind: &WindCondition,
    params: &ShipParams,
) -> Result<[f64; 6], DynamicsError> {
    let prop = propeller_forces(state, act.propeller, params)?;
    let f = hull_forces(state, params)
        + prop
        + rudder_forces(state, act, prop.x, params)?
        + thruster_forces(act.thruster, params)
        + wind_forces(state, wind, params);

    let mx = params.mass_x();
    let my = params.mass_y();
    let izm = params.inertia_midship();
    let xgm = params.particulars.x_g * params.particulars.mass;
    let (u, v, r) = (state.u, state.v, state.r);

    let u_dot = (f.x + my * v * r + xgm * r * r) / mx;
    // Coupled sway/yaw: [My xgm; xgm Izm] [v_dot; r_dot] = [a; b].
    let a = f.y - mx * u * r;
    let b = f.n - xgm * u * r;
    let det = my * izm - xgm * xgm;
    let v_dot = (a * izm - b * xgm) / det;
    let r_dot = (my * b - xgm * a) / det;

    let (xd, yd, pd) = body_to_earth_rates(state);
    let d = [xd, yd, pd, u_dot, v_dot, r_dot];
    if d.iter().all(|x| x.is_finite()) {
        Ok(d)
    } else {
        Err(DynamicsError::NonFinite(d))
    }
}

fn slew(current: f64, target: f64, max_step: f64) -> f64 {
    let diff = target - current;
    if diff.abs() <= max_step {
        target
    } else {
        current + max_step.copysign(diff)
    }
}

/// Moves each channel towards its command at the configured slew rate,
/// stopping exactly at the command.
pub fn actuator_rate_step(
    current: &ActuatorState,
    command: &ControlCommand,
    dt: f64,
    params: &ShipParams,
) -> ActuatorState {
    let a = &params.actuators;
    ActuatorState::new(
        slew(current.rudder_port, command.rudder_port, a.rudder_rate * dt),
        slew(current.rudder_starboard, command.rudder_starboard, a.rudder_rate * dt),
        slew(current.propeller, command.propeller, a.propeller_rate * dt),
        slew(current.thruster, command.thruster, a.thruster_rate * dt),
    )
}

/// One classical RK4 step with the actuator state frozen over the step, then
/// one actuator slew step of length `dt`.
pub fn rk4_step(
    state: &State,
    act: &ActuatorState,
    command: &ControlCommand,
    wind: &WindCondition,
    params: &ShipParams,
    dt: f64,
) -> Result<(State, ActuatorState), DynamicsError> {
    if !(dt > 0.0) {
        return Err(DynamicsError::BadStep(dt));
    }
    let f = |s: &State| total_derivative(s, act, wind, params);
    let k1 = f(state)?;
    let k2 = f(&(*state + scale(k1, 0.5 * dt)))?;
    let k3 = f(&(*state + scale(k2, 0.5 * dt)))?;
    let k4 = f(&(*state + scale(k3, dt)))?;
    let inc: [f64; 6] = std::array::from_fn(|i| dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    let next = *state + inc;
    if !next.is_finite() {
        return Err(DynamicsError::NonFinite(next.to_array()));
    }
    Ok((next, actuator_rate_step(act, command, dt, params)))
}

fn scale(v: [f64; 6], k: f64) -> [f64; 6] {
    v.map(|x| x * k)
}
