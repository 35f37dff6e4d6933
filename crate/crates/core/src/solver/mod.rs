//! Quasi-Newton SQP for smooth NLPs with bounds, equality rows and
//! inequality rows (`c_in(x) >= 0`).
//!
//! Each iteration solves a convex QP with a damped-BFGS Hessian of the
//! Lagrangian and finite-difference derivatives, then backtracks on an l1
//! merit function. Variables are scaled by [`Nlp::variable_scale`] before
//! anything else happens.

pub mod fd;
pub mod qp;

use std::time::Instant;

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fd::FdScheme;
pub use qp::{QpError, QpProblem, QpSolution};

/// Evaluation failure reported by an [`Nlp`].
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{message}")]
pub struct EvalError {
    pub message: String,
}

impl EvalError {
    pub fn new(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
        }
    }
}

/// A smooth nonlinear program.
///
/// Constraint rows are numbered with equalities first, then inequalities.
pub trait Nlp: Sync {
    fn n_vars(&self) -> usize;
    fn n_eq(&self) -> usize;
    fn n_ineq(&self) -> usize;
    /// Variable bounds; infinite entries are unbounded.
    fn bounds(&self) -> (Vec<f64>, Vec<f64>);
    fn objective(&self, x: &[f64]) -> Result<f64, EvalError>;
    fn constraints(&self, x: &[f64], eq: &mut [f64], ineq: &mut [f64]) -> Result<(), EvalError>;

    /// Analytic objective gradient, if available.
    fn gradient(&self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Analytic constraint Jacobians `(J_eq, J_in)`, if available.
    fn jacobian(&self, _x: &[f64]) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        None
    }

    /// Typical magnitude of each variable.
    fn variable_scale(&self) -> Vec<f64> {
        vec![1.0; self.n_vars()]
    }

    /// For each variable, the constraint rows it can affect.
    fn jacobian_structure(&self) -> Option<Vec<Vec<usize>>> {
        None
    }

    /// Human-readable description of constraint row `row`.
    fn row_label(&self, row: usize) -> String {
        if row < self.n_eq() {
            format!("eq[{row}]")
        } else {
            format!("ineq[{}]", row - self.n_eq())
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub max_iterations: usize,
    pub tol_con: f64,
    pub tol_opt: f64,
    pub tol_step: f64,
    pub fd_scheme: FdScheme,
    /// Relative finite-difference step; `None` uses the scheme default.
    pub fd_step: Option<f64>,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    /// Weight used for Powell's penalty update: new = max(|l|, w old + (1-w) |l|).
    pub penalty_memory: f64,
    /// Minimum l1 penalty for elastic QPs.
    pub elastic_penalty: f64,
    pub qp_max_iterations: usize,
    pub second_order_correction: bool,
    /// Record an iteration trace.
    pub trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 400,
            tol_con: 1e-6,
            tol_opt: 1e-5,
            tol_step: 1e-10,
            fd_scheme: FdScheme::Forward,
            fd_step: None,
            armijo: 1e-4,
            backtrack: 0.5,
            max_backtracks: 40,
            penalty_memory: 0.5,
            elastic_penalty: 100.0,
            qp_max_iterations: 20_000,
            second_order_correction: true,
            trace: true,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.tol_con > 0.0 && self.tol_opt > 0.0 && self.tol_step > 0.0) {
            return Err("tolerances must be > 0".into());
        }
        if self.max_iterations < 1 {
            return Err("max_iterations must be >= 1".into());
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err("backtrack factor must be in (0, 1)".into());
        }
        Ok(())
    }

    fn fd_rel(&self) -> f64 {
        self.fd_step.unwrap_or_else(|| self.fd_scheme.base_step())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverStatus {
    FeasibleOptimal,
    FeasibleStalled,
    Infeasible,
    MaxIterations,
}

impl SolverStatus {
    pub fn is_feasible(self) -> bool {
        matches!(self, SolverStatus::FeasibleOptimal | SolverStatus::FeasibleStalled)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SolverStatus::FeasibleOptimal => "feasible-optimal",
            SolverStatus::FeasibleStalled => "feasible-stalled",
            SolverStatus::Infeasible => "infeasible",
            SolverStatus::MaxIterations => "max-iterations",
        }
    }
}

impl std::fmt::Display for SolverStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Lagrange multipliers for the general constraint rows.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Multipliers {
    pub eq: Vec<f64>,
    pub ineq: Vec<f64>,
}

/// One accepted (or final) iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    pub violation: f64,
    pub step_norm: f64,
    pub alpha: f64,
    pub merit_before: f64,
    pub merit_after: f64,
    pub penalty: f64,
    pub qp_iterations: usize,
    pub elastic: bool,
    pub second_order: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverResult {
    pub status: SolverStatus,
    pub x: Vec<f64>,
    pub iterations: usize,
    pub max_violation: f64,
    pub objective: f64,
    pub wall_time: f64,
    pub multipliers: Multipliers,
    /// Violation from an independent evaluation of the returned point.
    pub audit_violation: f64,
    pub trace: Vec<IterationRecord>,
    pub message: String,
}

/// Components of the first-order optimality error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktResidual {
    pub stationarity: f64,
    pub complementarity: f64,
    pub violation: f64,
}

impl KktResidual {
    pub fn total(&self) -> f64 {
        self.stationarity + self.complementarity + self.violation
    }
}

/// Largest violation of the general rows: |c_eq| and max(0, -c_in).
pub fn row_violation(eq: &[f64], ineq: &[f64]) -> f64 {
    eq.iter()
        .map(|v| v.abs())
        .chain(ineq.iter().map(|v| (-v).max(0.0)))
        .fold(0.0, f64::max)
}

fn bound_violation(x: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    x.iter()
        .zip(lo.iter().zip(hi))
        .map(|(v, (l, h))| (l - v).max(v - h).max(0.0))
        .fold(0.0, f64::max)
}

/// Evaluates every constraint row at `x` and returns (eq, ineq).
pub fn evaluate_constraints<P: Nlp + ?Sized>(
    nlp: &P,
    x: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), EvalError> {
    let mut eq = vec![0.0; nlp.n_eq()];
    let mut ineq = vec![0.0; nlp.n_ineq()];
    nlp.constraints(x, &mut eq, &mut ineq)?;
    Ok((eq, ineq))
}

/// Projected-gradient KKT error of `nlp` at `x` with the given multipliers,
/// using analytic derivatives when provided and central differences otherwise.
pub fn kkt_residual<P: Nlp + ?Sized>(
    nlp: &P,
    x: &[f64],
    mult: &Multipliers,
) -> Result<KktResidual, EvalError> {
    let n = x.len();
    let (lo, hi) = nlp.bounds();
    let unbounded_lo = vec![f64::NEG_INFINITY; n];
    let unbounded_hi = vec![f64::INFINITY; n];
    let rel = FdScheme::Central.base_step();
    let g = match nlp.gradient(x) {
        Some(g) => g,
        None => {
            let f = |z: &[f64]| nlp.objective(z);
            let f0 = nlp.objective(x)?;
            fd::gradient(&f, x, f0, &unbounded_lo, &unbounded_hi, FdScheme::Central, rel)?
        }
    };
    let (eq, ineq) = evaluate_constraints(nlp, x)?;
    let (je, ji) = match nlp.jacobian(x) {
        Some(j) => j,
        None => {
            let c = |z: &[f64]| {
                let (a, b) = evaluate_constraints(nlp, z)?;
                Ok([a, b].concat())
            };
            let c0 = [eq.clone(), ineq.clone()].concat();
            let j = fd::jacobian(
                &c,
                x,
                &c0,
                &unbounded_lo,
                &unbounded_hi,
                None,
                FdScheme::Central,
                rel,
            )?;
            let me = eq.len();
            (j.rows(0, me).into_owned(), j.rows(me, ineq.len()).into_owned())
        }
    };
    let le = DVector::from_column_slice(&mult.eq);
    let li = DVector::from_column_slice(&mult.ineq);
    let r = DVector::from_column_slice(&g) - je.tr_mul(&le) - ji.tr_mul(&li);
    let mut stat: f64 = 0.0;
    for i in 0..n {
        let at_lo = lo[i].is_finite() && x[i] <= lo[i] + 1e-12 * (1.0 + lo[i].abs());
        let at_hi = hi[i].is_finite() && x[i] >= hi[i] - 1e-12 * (1.0 + hi[i].abs());
        let e = match (at_lo, at_hi) {
            (true, true) => 0.0,
            (true, false) => (-r[i]).max(0.0),
            (false, true) => r[i].max(0.0),
            (false, false) => r[i].abs(),
        };
        stat = stat.max(e);
    }
    let mut comp: f64 = 0.0;
    for (l, c) in mult.ineq.iter().zip(&ineq) {
        comp = comp.max((l * c).abs()).max((-l).max(0.0));
    }
    let violation = row_violation(&eq, &ineq).max(bound_violation(x, &lo, &hi));
    Ok(KktResidual {
        stationarity: stat,
        complementarity: comp,
        violation,
    })
}

/// The NLP seen through the variable scaling x = s * z.
struct Scaled<'a, P: Nlp + ?Sized> {
    nlp: &'a P,
    scale: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    structure: Option<Vec<Vec<usize>>>,
    me: usize,
    mi: usize,
}

struct Point {
    z: Vec<f64>,
    f: f64,
    eq: Vec<f64>,
    ineq: Vec<f64>,
}

impl<'a, P: Nlp + ?Sized> Scaled<'a, P> {
    fn new(nlp: &'a P) -> Result<Self, String> {
        let n = nlp.n_vars();
        let scale = nlp.variable_scale();
        if scale.len() != n || scale.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err("variable scales must be finite and positive".into());
        }
        let (lo, hi) = nlp.bounds();
        if lo.len() != n || hi.len() != n {
            return Err("bounds have the wrong length".into());
        }
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return Err("lower bound above upper bound".into());
        }
        let lo = lo.iter().zip(&scale).map(|(l, s)| l / s).collect();
        let hi = hi.iter().zip(&scale).map(|(h, s)| h / s).collect();
        Ok(Self {
            structure: nlp.jacobian_structure(),
            nlp,
            scale,
            lo,
            hi,
            me: nlp.n_eq(),
            mi: nlp.n_ineq(),
        })
    }

    fn x(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.scale).map(|(a, b)| a * b).collect()
    }

    fn f(&self, z: &[f64]) -> Result<f64, EvalError> {
        let f = self.nlp.objective(&self.x(z))?;
        if f.is_finite() {
            Ok(f)
        } else {
            Err(EvalError::new("objective is not finite"))
        }
    }

    fn c(&self, z: &[f64]) -> Result<Vec<f64>, EvalError> {
        let mut eq = vec![0.0; self.me];
        let mut ineq = vec![0.0; self.mi];
        self.nlp.constraints(&self.x(z), &mut eq, &mut ineq)?;
        eq.extend(ineq);
        if let Some(row) = eq.iter().position(|v| !v.is_finite()) {
            return Err(EvalError::new(format!(
                "constraint {} is not finite",
                self.nlp.row_label(row)
            )));
        }
        Ok(eq)
    }

    fn point(&self, z: Vec<f64>) -> Result<Point, EvalError> {
        let f = self.f(&z)?;
        let mut c = self.c(&z)?;
        let ineq = c.split_off(self.me);
        Ok(Point { z, f, eq: c, ineq })
    }

    fn grad(&self, p: &Point, opts: &SolverOptions) -> Result<DVector<f64>, EvalError> {
        let g = match self.nlp.gradient(&self.x(&p.z)) {
            Some(g) => g.iter().zip(&self.scale).map(|(a, b)| a * b).collect(),
            None => fd::gradient(
                &|z: &[f64]| self.f(z),
                &p.z,
                p.f,
                &self.lo,
                &self.hi,
                opts.fd_scheme,
                opts.fd_rel(),
            )?,
        };
        Ok(DVector::from_vec(g))
    }

    fn jac(&self, p: &Point, opts: &SolverOptions) -> Result<(DMatrix<f64>, DMatrix<f64>), EvalError> {
        if let Some((mut je, mut ji)) = self.nlp.jacobian(&self.x(&p.z)) {
            for (j, s) in self.scale.iter().enumerate() {
                je.column_mut(j).scale_mut(*s);
                ji.column_mut(j).scale_mut(*s);
            }
            return Ok((je, ji));
        }
        let c0 = [p.eq.clone(), p.ineq.clone()].concat();
        let j = fd::jacobian(
            &|z: &[f64]| self.c(z),
            &p.z,
            &c0,
            &self.lo,
            &self.hi,
            self.structure.as_deref(),
            opts.fd_scheme,
            opts.fd_rel(),
        )?;
        Ok((j.rows(0, self.me).into_owned(), j.rows(self.me, self.mi).into_owned()))
    }
}

fn weighted_violation(eq: &[f64], ineq: &[f64], pe: &[f64], pi: &[f64]) -> f64 {
    let a: f64 = eq.iter().zip(pe).map(|(c, p)| p * c.abs()).sum();
    let b: f64 = ineq.iter().zip(pi).map(|(c, p)| p * (-c).max(0.0)).sum();
    a + b
}

struct Linearization {
    g: DVector<f64>,
    je: DMatrix<f64>,
    ji: DMatrix<f64>,
}

fn build_qp(
    b: &DMatrix<f64>,
    lin: &Linearization,
    eq: &[f64],
    ineq: &[f64],
    z: &[f64],
    lo: &[f64],
    hi: &[f64],
) -> QpProblem {
    QpProblem {
        h: b.clone(),
        g: lin.g.clone(),
        a_eq: lin.je.clone(),
        b_eq: -DVector::from_column_slice(eq),
        a_in: lin.ji.clone(),
        b_in: -DVector::from_column_slice(ineq),
        lower: lo.iter().zip(z).map(|(l, v)| l - v).collect(),
        upper: hi.iter().zip(z).map(|(h, v)| h - v).collect(),
    }
}

/// Damped BFGS update keeping `b` positive definite.
fn bfgs_update(b: &mut DMatrix<f64>, s: &DVector<f64>, y: &DVector<f64>) {
    let bs = &*b * s;
    let sbs = s.dot(&bs);
    if !(sbs > 0.0) || !sbs.is_finite() {
        return;
    }
    let sy = s.dot(y);
    let theta = if sy >= 0.2 * sbs {
        1.0
    } else {
        0.8 * sbs / (sbs - sy)
    };
    let r = y * theta + &bs * (1.0 - theta);
    let sr = s.dot(&r);
    if !(sr > 0.0) || !sr.is_finite() {
        return;
    }
    b.ger(-1.0 / sbs, &bs, &bs, 1.0);
    b.ger(1.0 / sr, &r, &r, 1.0);
    // Keep exact symmetry against rounding drift.
    let bt = b.transpose();
    *b = (&*b + bt) * 0.5;
}

/// Runs the SQP method from `x_init`.
pub fn solve<P: Nlp + ?Sized>(nlp: &P, x_init: &[f64], opts: &SolverOptions) -> SolverResult {
    let start = Instant::now();
    let n = nlp.n_vars();
    let me = nlp.n_eq();
    let mi = nlp.n_ineq();
    let fail = |msg: String, x: Vec<f64>| SolverResult {
        status: SolverStatus::Infeasible,
        x,
        iterations: 0,
        max_violation: f64::INFINITY,
        objective: f64::NAN,
        wall_time: start.elapsed().as_secs_f64(),
        multipliers: Multipliers {
            eq: vec![0.0; me],
            ineq: vec![0.0; mi],
        },
        audit_violation: f64::INFINITY,
        trace: Vec::new(),
        message: msg,
    };
    if let Err(e) = opts.validate() {
        return fail(format!("invalid options: {e}"), x_init.to_vec());
    }
    if x_init.len() != n {
        return fail(
            format!("initial point has {} entries, expected {n}", x_init.len()),
            x_init.to_vec(),
        );
    }
    let sp = match Scaled::new(nlp) {
        Ok(s) => s,
        Err(e) => return fail(e, x_init.to_vec()),
    };
    let mut z0: Vec<f64> = x_init.iter().zip(&sp.scale).map(|(x, s)| x / s).collect();
    let mut clamped = 0;
    for i in 0..n {
        let v = z0[i].clamp(sp.lo[i], sp.hi[i]);
        if v != z0[i] {
            clamped += 1;
            z0[i] = v;
        }
    }
    if clamped > 0 {
        warn!("initial point violated {clamped} variable bounds; clamped");
    }

    let mut cur = match sp.point(z0) {
        Ok(p) => p,
        Err(e) => return fail(format!("evaluation failed at initial point: {e}"), x_init.to_vec()),
    };
    let mut lin = match sp.grad(&cur, opts).and_then(|g| {
        let (je, ji) = sp.jac(&cur, opts)?;
        Ok(Linearization { g, je, ji })
    }) {
        Ok(l) => l,
        Err(e) => return fail(format!("derivative evaluation failed: {e}"), sp.x(&cur.z)),
    };

    let mut b = DMatrix::<f64>::identity(n, n);
    let mut first_update = true;
    let mut pen_e = vec![0.0; me];
    let mut pen_i = vec![0.0; mi];
    let mut mult = Multipliers {
        eq: vec![0.0; me],
        ineq: vec![0.0; mi],
    };
    let mut trace = Vec::new();
    let mut status = SolverStatus::MaxIterations;
    let mut message = String::from("iteration limit reached");
    let mut iterations = 0;

    for iter in 0..opts.max_iterations {
        iterations = iter;
        let viol = row_violation(&cur.eq, &cur.ineq);
        let max_pen = pen_e.iter().chain(&pen_i).fold(0.0, |a: f64, b| a.max(*b));
        let rho = opts.elastic_penalty.max(10.0 * max_pen);
        let qp = build_qp(&b, &lin, &cur.eq, &cur.ineq, &cur.z, &sp.lo, &sp.hi);
        let sol = match qp::solve_qp(&qp, rho, opts.qp_max_iterations) {
            Ok(s) => s,
            Err(e) => {
                debug!("QP failed ({e}); resetting Hessian");
                b = DMatrix::identity(n, n);
                first_update = true;
                let qp = build_qp(&b, &lin, &cur.eq, &cur.ineq, &cur.z, &sp.lo, &sp.hi);
                match qp::solve_qp(&qp, rho, opts.qp_max_iterations) {
                    Ok(s) => s,
                    Err(e) => {
                        status = stalled_status(viol, opts);
                        message = format!("QP subproblem failed: {e}");
                        break;
                    }
                }
            }
        };
        let d = &sol.step;
        mult.eq = sol.lambda_eq.iter().copied().collect();
        mult.ineq = sol.lambda_in.iter().copied().collect();

        // Optimality at the current point, with the QP multipliers.
        let resid = &lin.g
            - lin.je.tr_mul(&sol.lambda_eq)
            - lin.ji.tr_mul(&sol.lambda_in)
            - &sol.bounds;
        let stat = resid.amax();
        let comp = mult
            .ineq
            .iter()
            .zip(&cur.ineq)
            .fold(0.0, |a: f64, (l, c)| a.max((l * c).abs()));
        let gscale = 1.0f64.max(lin.g.amax());
        let zscale = 1.0 + cur.z.iter().fold(0.0, |a: f64, v| a.max(v.abs()));
        let small_step = d.amax() <= opts.tol_opt * zscale;
        if viol <= opts.tol_con
            && !sol.elastic
            && ((stat <= opts.tol_opt * gscale && comp <= opts.tol_opt && small_step)
                || d.amax() <= opts.tol_step)
        {
            status = SolverStatus::FeasibleOptimal;
            message = "KKT conditions satisfied".into();
            break;
        }

        // Powell's penalty update.
        let w = opts.penalty_memory;
        for (p, l) in pen_e.iter_mut().zip(&mult.eq) {
            *p = l.abs().max(w * *p + (1.0 - w) * l.abs());
        }
        for (p, l) in pen_i.iter_mut().zip(&mult.ineq) {
            *p = l.abs().max(w * *p + (1.0 - w) * l.abs());
        }
        if sol.elastic {
            // The elastic QP certifies that rho is an adequate weight.
            for p in pen_e.iter_mut().chain(pen_i.iter_mut()) {
                *p = p.max(rho);
            }
        }

        let ce = DVector::from_column_slice(&cur.eq) + &lin.je * d;
        let ci = DVector::from_column_slice(&cur.ineq) + &lin.ji * d;
        let h0 = weighted_violation(&cur.eq, &cur.ineq, &pen_e, &pen_i);
        let h_model = weighted_violation(ce.as_slice(), ci.as_slice(), &pen_e, &pen_i);
        let mut slope = lin.g.dot(d) - h0 + h_model;
        if slope >= 0.0 {
            // Non-descent only happens when d is negligible.
            slope = -(d.dot(&(&b * d))).max(0.0);
        }
        let merit0 = cur.f + h0;
        let merit = |p: &Point| p.f + weighted_violation(&p.eq, &p.ineq, &pen_e, &pen_i);

        let mut alpha = 1.0;
        let mut accepted: Option<(Point, bool)> = None;
        let mut soc_tried = !opts.second_order_correction;
        for _ in 0..opts.max_backtracks {
            let zt: Vec<f64> = cur
                .z
                .iter()
                .zip(d.iter())
                .zip(sp.lo.iter().zip(&sp.hi))
                .map(|((z, s), (l, h))| (z + alpha * s).clamp(*l, *h))
                .collect();
            let trial = sp.point(zt);
            if let Ok(t) = &trial {
                if merit(t) <= merit0 + opts.armijo * alpha * slope {
                    accepted = Some((trial.unwrap(), false));
                    break;
                }
            }
            if !soc_tried {
                soc_tried = true;
                if let Ok(t) = &trial {
                    // Second-order correction: re-linearise around the trial
                    // constraint values.
                    let ce2: Vec<f64> = t
                        .eq
                        .iter()
                        .zip((&lin.je * d).iter())
                        .map(|(c, jd)| c - jd)
                        .collect();
                    let ci2: Vec<f64> = t
                        .ineq
                        .iter()
                        .zip((&lin.ji * d).iter())
                        .map(|(c, jd)| c - jd)
                        .collect();
                    let qp2 = build_qp(&b, &lin, &ce2, &ci2, &cur.z, &sp.lo, &sp.hi);
                    if let Ok(s2) = qp::solve_strict(&qp2, opts.qp_max_iterations) {
                        let zc: Vec<f64> = cur
                            .z
                            .iter()
                            .zip(s2.step.iter())
                            .zip(sp.lo.iter().zip(&sp.hi))
                            .map(|((z, s), (l, h))| (z + s).clamp(*l, *h))
                            .collect();
                        if let Ok(tc) = sp.point(zc) {
                            if merit(&tc) <= merit0 + opts.armijo * slope {
                                accepted = Some((tc, true));
                                break;
                            }
                        }
                    }
                }
            }
            alpha *= opts.backtrack;
            if alpha * d.amax() < opts.tol_step {
                break;
            }
        }

        let Some((next, soc)) = accepted else {
            status = stalled_status(viol, opts);
            message = "line search failed to reduce the merit function".into();
            break;
        };
        let s = DVector::from_iterator(n, next.z.iter().zip(&cur.z).map(|(a, b)| a - b));
        let merit_after = merit(&next);
        let next_lin = match sp.grad(&next, opts).and_then(|g| {
            let (je, ji) = sp.jac(&next, opts)?;
            Ok(Linearization { g, je, ji })
        }) {
            Ok(l) => l,
            Err(e) => {
                status = SolverStatus::Infeasible;
                message = format!("derivative evaluation failed: {e}");
                cur = next;
                break;
            }
        };
        let grad_l = |l: &Linearization| {
            &l.g - l.je.tr_mul(&sol.lambda_eq) - l.ji.tr_mul(&sol.lambda_in)
        };
        let y = grad_l(&next_lin) - grad_l(&lin);
        if first_update {
            let sy = s.dot(&y);
            if sy > 0.0 {
                b = DMatrix::identity(n, n) * (y.dot(&y) / sy);
            }
            first_update = false;
        }
        bfgs_update(&mut b, &s, &y);

        if opts.trace {
            trace.push(IterationRecord {
                iteration: iter + 1,
                objective: next.f,
                violation: row_violation(&next.eq, &next.ineq),
                step_norm: s.amax(),
                alpha: if soc { 1.0 } else { alpha },
                merit_before: merit0,
                merit_after,
                penalty: pen_e.iter().chain(&pen_i).fold(0.0, |a: f64, b| a.max(*b)),
                qp_iterations: sol.iterations,
                elastic: sol.elastic,
                second_order: soc,
            });
        }
        cur = next;
        lin = next_lin;
        iterations = iter + 1;
        if s.amax() < opts.tol_step {
            status = stalled_status(row_violation(&cur.eq, &cur.ineq), opts);
            message = "step below tolerance".into();
            break;
        }
    }

    let x = sp.x(&cur.z);
    let max_violation = row_violation(&cur.eq, &cur.ineq);
    let (lo, hi) = nlp.bounds();
    let audit_violation = match evaluate_constraints(nlp, &x) {
        Ok((eq, ineq)) => row_violation(&eq, &ineq).max(bound_violation(&x, &lo, &hi)),
        Err(_) => f64::INFINITY,
    };
    if status.is_feasible() && !(audit_violation <= opts.tol_con) {
        status = SolverStatus::Infeasible;
        message = format!("feasibility audit failed: violation {audit_violation:e}");
    }
    SolverResult {
        status,
        x,
        iterations,
        max_violation,
        objective: cur.f,
        wall_time: start.elapsed().as_secs_f64(),
        multipliers: mult,
        audit_violation,
        trace,
        message,
    }
}

fn stalled_status(viol: f64, opts: &SolverOptions) -> SolverStatus {
    if viol <= opts.tol_con {
        SolverStatus::FeasibleStalled
    } else {
        SolverStatus::Infeasible
    }
}
