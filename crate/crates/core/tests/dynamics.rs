//! Symmetry, equilibrium and integration-order properties of the ship model.

mod common;

use berthplan::dynamics::{
    actuator_rate_step, rk4_step, total_derivative, ActuatorState, ControlCommand, ShipParams, State,
    WindCondition,
};
use common::{rk4_order_slope, rotate_state};
use proptest::prelude::*;

fn ship() -> ShipParams {
    ShipParams::ship_a()
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())))
}

prop_compose! {
    fn any_state()(
        x in -50.0..80.0f64, y in -20.0..20.0f64, psi in -6.3..6.3f64,
        u in -0.75..0.75f64, v in -0.4..0.4f64, r in -0.3..0.3f64,
    ) -> State {
        State::new(x, y, psi, u, v, r)
    }
}

prop_compose! {
    fn any_actuator()(
        dp in -0.78..0.26f64, ds in -0.26..0.78f64, np in 0.0..10.0f64, nbt in -15.0..15.0f64,
    ) -> ActuatorState {
        ActuatorState::new(dp, ds, np, nbt)
    }
}

prop_compose! {
    fn any_wind()(speed in 0.0..1.0f64, dir in 0.0..360.0f64) -> WindCondition {
        WindCondition::from_degrees(speed, dir)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn at_rest_without_actuation_nothing_moves(x in -50.0..80.0f64, y in -20.0..20.0f64, psi in -6.3..6.3f64) {
        let d = total_derivative(&State::new(x, y, psi, 0.0, 0.0, 0.0), &ActuatorState::neutral(0.0), &WindCondition::calm(), &ship()).unwrap();
        prop_assert!(d.iter().all(|v| v.abs() <= 1e-14), "{d:?}");
    }

    #[test]
    fn mirror_image_has_mirrored_derivative(s in any_state(), a in any_actuator(), w in any_wind()) {
        let p = ship();
        let d = total_derivative(&s, &a, &w, &p).unwrap();
        let m = total_derivative(&s.mirrored(), &a.mirrored(), &w.mirrored(), &p).unwrap();
        let expect = [d[0], -d[1], -d[2], d[3], -d[4], -d[5]];
        prop_assert!(close(&m, &expect, 1e-9), "{m:?} vs {expect:?}");
    }

    #[test]
    fn rotating_the_earth_frame_leaves_body_rates_unchanged(
        s in any_state(), a in any_actuator(), w in any_wind(), theta in -3.2..3.2f64,
    ) {
        let p = ship();
        let d = total_derivative(&s, &a, &w, &p).unwrap();
        let (rs, rw) = rotate_state(&s, &w, theta);
        let e = total_derivative(&rs, &a, &rw, &p).unwrap();
        prop_assert!(close(&d[3..], &e[3..], 1e-9));
        let (c, sn) = (theta.cos(), theta.sin());
        let rotated = [c * d[0] - sn * d[1], sn * d[0] + c * d[1], d[2]];
        prop_assert!(close(&e[..3], &rotated, 1e-9));
    }

    #[test]
    fn slew_moves_towards_command_without_overshoot(
        a in any_actuator(), dp in -0.78..0.26f64, ds in -0.26..0.78f64, np in 0.0..10.0f64, nbt in -15.0..15.0f64,
        dt in 0.01..5.0f64,
    ) {
        let p = ship();
        let cmd = ControlCommand::new(dp, ds, np, nbt);
        let next = actuator_rate_step(&a, &cmd, dt, &p);
        let rates = [p.actuators.rudder_rate, p.actuators.rudder_rate, p.actuators.propeller_rate, p.actuators.thruster_rate];
        for i in 0..4 {
            let (from, to, target) = (a.to_array()[i], next.to_array()[i], cmd.to_array()[i]);
            prop_assert!((to - from).abs() <= rates[i] * dt * (1.0 + 1e-12));
            prop_assert!((target - to).abs() <= (target - from).abs());
            prop_assert!((to - from) * (target - from) >= 0.0);
        }
    }

    #[test]
    fn rk4_step_is_finite_and_mirrors(s in any_state(), a in any_actuator(), w in any_wind()) {
        let p = ship();
        let cmd = ControlCommand::new(a.rudder_port, a.rudder_starboard, a.propeller, a.thruster);
        let (n, _) = rk4_step(&s, &a, &cmd, &w, &p, 0.5).unwrap();
        let (m, _) = rk4_step(&s.mirrored(), &a.mirrored(), &cmd.mirrored(), &w.mirrored(), &p, 0.5).unwrap();
        prop_assert!(n.is_finite());
        prop_assert!(close(&m.to_array(), &n.mirrored().to_array(), 1e-9));
    }
}

#[test]
fn rk4_converges_at_fourth_order() {
    let slope = rk4_order_slope();
    assert!(slope >= 3.7, "slope {slope}");
}
