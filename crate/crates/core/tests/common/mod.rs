//! Shared oracles for integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::Path;

use berthplan::cli::{BUNDLED_PORT, BUNDLED_SHIP};
use berthplan::config::{port_from_str, ship_from_str, Port};
use berthplan::constraints::SpeedLimitCoefficients;
use berthplan::dynamics::{rk4_step, ActuatorState, ControlCommand, ShipParams, State, WindCondition};
use berthplan::geometry::Point;
use berthplan::solver::qp::QpProblem;
use berthplan::solver::{EvalError, Nlp};
use berthplan::constraints::build_actuator_bounds;
use berthplan::transcription::{DecisionVector, OcpSpec};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub fn bundled_ship() -> (ShipParams, SpeedLimitCoefficients) {
    ship_from_str(Path::new("ship.toml"), BUNDLED_SHIP).unwrap()
}

pub fn bundled_port() -> Port {
    port_from_str(Path::new("port.toml"), BUNDLED_PORT).unwrap()
}

/// OCP on the bundled ship and port, starting at `x0` in calm air.
pub fn bundled_spec(x0: State, segments: usize) -> OcpSpec {
    let (ship, coeffs) = bundled_ship();
    let port = bundled_port();
    let mut spec = OcpSpec::new(x0, port.berth, segments, WindCondition::calm(), ship, port.polygon);
    spec.coeffs = coeffs;
    spec
}

/// Crossing-number point-in-polygon test; `verts` is open (no repeat).
pub fn crossing_inside(q: Point, verts: &[Point]) -> bool {
    let mut inside = false;
    let n = verts.len();
    for i in 0..n {
        let (a, b) = (verts[i], verts[(i + 1) % n]);
        if (a[1] > q[1]) != (b[1] > q[1]) {
            let x = a[0] + (q[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if q[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Distance from `q` to the closest polygon edge.
pub fn edge_distance(q: Point, verts: &[Point]) -> f64 {
    let n = verts.len();
    (0..n)
        .map(|i| {
            let (a, b) = (verts[i], verts[(i + 1) % n]);
            let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
            let t = (((q[0] - a[0]) * ex + (q[1] - a[1]) * ey) / (ex * ex + ey * ey)).clamp(0.0, 1.0);
            (q[0] - a[0] - t * ex).hypot(q[1] - a[1] - t * ey)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Ellipse vertices of the ship domain, recomputed from the particulars.
pub fn domain_outline(s: &State, ship: &ShipParams, n: usize) -> Vec<Point> {
    let p = &ship.particulars;
    let rel = s.u.hypot(s.v) / p.nominal_speed;
    let a = 0.5 * p.length * (1.0 + ship.domain.k_a * rel);
    let b = 0.5 * p.breadth * (1.0 + ship.domain.k_b * rel);
    (0..n)
        .map(|j| {
            let t = 2.0 * PI * j as f64 / n as f64;
            let (ex, ey) = (a * t.cos(), b * t.sin());
            [s.x + ex * s.psi.cos() - ey * s.psi.sin(), s.y + ex * s.psi.sin() + ey * s.psi.cos()]
        })
        .collect()
}

/// Corridor written out from the closed form.
pub fn corridor(distance: f64, ship: &ShipParams, c: &SpeedLimitCoefficients) -> (f64, f64) {
    let d = distance / ship.particulars.length;
    let f = |c1: f64, c2: f64, c3: f64| ship.particulars.nominal_speed * (c1 * d + c2 * (1.0 - (-c3 * d).exp()));
    (f(c.lower.c1, c.lower.c2, c.lower.c3), f(c.upper.c1, c.upper.c2, c.upper.c3))
}

/// Rotates the earth frame by `theta` about the origin.
pub fn rotate_state(s: &State, w: &WindCondition, theta: f64) -> (State, WindCondition) {
    let (c, sn) = (theta.cos(), theta.sin());
    let rs = State::new(c * s.x - sn * s.y, sn * s.x + c * s.y, s.psi + theta, s.u, s.v, s.r);
    (rs, WindCondition::new(w.speed(), w.direction() + theta, w.sampled_at()))
}

/// Least-squares slope of log error against log step for a 10 s drifting
/// manoeuvre with steady actuation, against a step-0.003125 s reference.
/// The sway rate stays large relative to the yaw rate, so the local cross
/// flow keeps its sign along the hull and the |w|w drag term is smooth.
pub fn rk4_order_slope() -> f64 {
    let p = ShipParams::ship_a();
    let act = ActuatorState::new(-0.3, 0.3, 10.0, 0.0);
    let cmd = ControlCommand::new(act.rudder_port, act.rudder_starboard, act.propeller, act.thruster);
    let wind = WindCondition::from_degrees(0.8, 60.0);
    let start = State::new(0.0, 0.0, 0.3, 0.5, 0.1, 0.0);
    let run = |dt: f64| {
        let steps = (10.0 / dt).round() as usize;
        let mut s = start;
        for _ in 0..steps {
            s = rk4_step(&s, &act, &cmd, &wind, &p, dt).unwrap().0;
        }
        s
    };
    let reference = run(0.003125);
    let steps = [0.2, 0.1, 0.05, 0.025];
    let pts: Vec<(f64, f64)> = steps
        .iter()
        .map(|&dt| {
            let e = (run(dt) - reference).iter().map(|v| v.abs()).fold(0.0, f64::max);
            (dt.ln(), e.ln())
        })
        .collect();
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

pub fn random_controls<R: Rng>(spec: &OcpSpec, rng: &mut R) -> Vec<ControlCommand> {
    let b = build_actuator_bounds(&spec.ship).as_array();
    (0..spec.segments)
        .map(|_| ControlCommand::from_array(b.map(|i| if i.hi > i.lo { rng.gen_range(i.lo..=i.hi) } else { i.lo })))
        .collect()
}

/// Weighted squared error and trapezoid rule written out longhand.
pub fn direct_cost(dv: &DecisionVector, spec: &OcpSpec) -> (f64, f64) {
    let l = spec.ship.particulars.length;
    let us = spec.ship.particulars.nominal_speed;
    let scales = [l, l, PI, us, us, us / l];
    let err = |s: &State| {
        let e = *s - spec.xf;
        (0..6).map(|i| (e[i] / scales[i]).powi(2)).sum::<f64>()
    };
    let dt = dv.tf / spec.segments as f64;
    let mut integral = 0.0;
    for k in 0..spec.segments {
        integral += 0.5 * dt * (err(&dv.states[k]) + err(&dv.states[k + 1]));
    }
    (err(dv.states.last().unwrap()), integral)
}

/// Random strictly convex QP with n <= 6 variables and at most 4 constraint
/// rows (bounds included), feasible by construction.
pub fn random_qp<R: Rng>(rng: &mut R) -> QpProblem {
    let n = rng.gen_range(1..=6);
    let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let h = m.transpose() * &m + DMatrix::identity(n, n) * 0.5;
    let g = DVector::from_fn(n, |_, _| rng.gen_range(-3.0..3.0));
    let x0 = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    let rows = rng.gen_range(0..=4usize);
    let n_eq = rng.gen_range(0..=rows.min(n - 1).min(2));
    let n_bounds = rng.gen_range(0..=(rows - n_eq).min(2));
    let n_in = rows - n_eq - n_bounds;
    let a_eq = DMatrix::from_fn(n_eq, n, |_, _| rng.gen_range(-1.0..1.0));
    let b_eq = &a_eq * &x0;
    let a_in = DMatrix::from_fn(n_in, n, |_, _| rng.gen_range(-1.0..1.0));
    let b_in = &a_in * &x0 - DVector::from_fn(n_in, |_, _| rng.gen_range(0.0..0.5));
    let mut lower = vec![f64::NEG_INFINITY; n];
    let mut upper = vec![f64::INFINITY; n];
    for _ in 0..n_bounds {
        let i = rng.gen_range(0..n);
        if rng.gen_bool(0.5) && lower[i].is_infinite() {
            lower[i] = x0[i] - rng.gen_range(0.0..0.5);
        } else if upper[i].is_infinite() {
            upper[i] = x0[i] + rng.gen_range(0.0..0.5);
        }
    }
    QpProblem {
        h,
        g,
        a_eq,
        b_eq,
        a_in,
        b_in,
        lower,
        upper,
    }
}

/// Exhaustive active-set oracle: solves the KKT system for every subset of
/// inequality rows and returns the unique primal-dual feasible candidate.
pub fn brute_force_qp(qp: &QpProblem) -> Option<DVector<f64>> {
    let n = qp.g.len();
    let mut rows: Vec<(DVector<f64>, f64)> = Vec::new();
    for i in 0..qp.a_in.nrows() {
        rows.push((qp.a_in.row(i).transpose(), qp.b_in[i]));
    }
    for i in 0..n {
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        if qp.lower[i].is_finite() {
            rows.push((e.clone(), qp.lower[i]));
        }
        if qp.upper[i].is_finite() {
            rows.push((-e, -qp.upper[i]));
        }
    }
    let me = qp.a_eq.nrows();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 0u32..(1 << rows.len()) {
        let act: Vec<usize> = (0..rows.len()).filter(|k| mask & (1 << k) != 0).collect();
        let m = me + act.len();
        let mut k = DMatrix::zeros(n + m, n + m);
        let mut rhs = DVector::zeros(n + m);
        k.view_mut((0, 0), (n, n)).copy_from(&qp.h);
        for j in 0..n {
            rhs[j] = -qp.g[j];
        }
        for r in 0..m {
            let (a, b) = if r < me {
                (qp.a_eq.row(r).transpose(), qp.b_eq[r])
            } else {
                rows[act[r - me]].clone()
            };
            for j in 0..n {
                k[(j, n + r)] = -a[j];
                k[(n + r, j)] = a[j];
            }
            rhs[n + r] = b;
        }
        let Some(sol) = k.clone().full_piv_lu().solve(&rhs) else { continue };
        if ((&k * &sol) - &rhs).amax() > 1e-9 {
            continue;
        }
        let x = sol.rows(0, n).into_owned();
        let primal = rows.iter().all(|(a, b)| a.dot(&x) >= b - 1e-9);
        let dual = (0..act.len()).all(|i| sol[n + me + i] >= -1e-9);
        if primal && dual {
            let f = 0.5 * x.dot(&(&qp.h * &x)) + qp.g.dot(&x);
            if best.as_ref().map_or(true, |(bf, _)| f < *bf) {
                best = Some((f, x));
            }
        }
    }
    best.map(|(_, x)| x)
}

/// min (x-2)^2 + (y-3)^2 subject to x + y = 1; optimum (0, 1).
pub struct Projection {
    pub with_gradient: bool,
}

impl Nlp for Projection {
    fn n_vars(&self) -> usize {
        2
    }
    fn n_eq(&self) -> usize {
        1
    }
    fn n_ineq(&self) -> usize {
        0
    }
    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![f64::NEG_INFINITY; 2], vec![f64::INFINITY; 2])
    }
    fn objective(&self, x: &[f64]) -> Result<f64, EvalError> {
        Ok((x[0] - 2.0).powi(2) + (x[1] - 3.0).powi(2))
    }
    fn constraints(&self, x: &[f64], eq: &mut [f64], _: &mut [f64]) -> Result<(), EvalError> {
        eq[0] = x[0] + x[1] - 1.0;
        Ok(())
    }
    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.with_gradient
            .then(|| vec![2.0 * (x[0] - 2.0), 2.0 * (x[1] - 3.0)])
    }
    fn jacobian(&self, _: &[f64]) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        self.with_gradient.then(|| {
            (
                DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
                DMatrix::zeros(0, 2),
            )
        })
    }
}

/// Rosenbrock inside the disc x^2 + y^2 <= 2; optimum (1, 1).
pub struct Rosenbrock {
    pub scale: f64,
}

impl Nlp for Rosenbrock {
    fn n_vars(&self) -> usize {
        2
    }
    fn n_eq(&self) -> usize {
        0
    }
    fn n_ineq(&self) -> usize {
        1
    }
    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![f64::NEG_INFINITY; 2], vec![f64::INFINITY; 2])
    }
    fn objective(&self, x: &[f64]) -> Result<f64, EvalError> {
        Ok(self.scale * ((1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)))
    }
    fn constraints(&self, x: &[f64], _: &mut [f64], ineq: &mut [f64]) -> Result<(), EvalError> {
        ineq[0] = 2.0 - x[0] * x[0] - x[1] * x[1];
        Ok(())
    }
}

/// min (x-3)^2 + (y+2)^2 over the box [0, 1] x [-1, 1]; optimum (1, -1).
pub struct BoxQuadratic;

impl Nlp for BoxQuadratic {
    fn n_vars(&self) -> usize {
        2
    }
    fn n_eq(&self) -> usize {
        0
    }
    fn n_ineq(&self) -> usize {
        0
    }
    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![0.0, -1.0], vec![1.0, 1.0])
    }
    fn objective(&self, x: &[f64]) -> Result<f64, EvalError> {
        Ok((x[0] - 3.0).powi(2) + (x[1] + 2.0).powi(2))
    }
    fn constraints(&self, _: &[f64], _: &mut [f64], _: &mut [f64]) -> Result<(), EvalError> {
        Ok(())
    }
}
