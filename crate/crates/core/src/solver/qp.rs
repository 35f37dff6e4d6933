//! Strictly convex QP subproblems, solved with the Goldfarb-Idnani dual
//! active-set method.
//!
//! ```text
//! minimize   1/2 d'Hd + g'd
//! subject to A_eq d = b_eq,  A_in d >= b_in,  lower <= d <= upper
//! ```
//!
//! When the constraints are inconsistent the problem is re-solved in elastic
//! form, with l1-penalised slacks on every general row.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("QP Hessian is not positive definite")]
    NotPositiveDefinite,
    #[error("QP constraints are inconsistent")]
    Infeasible,
    #[error("QP iteration limit {0} reached")]
    IterationLimit(usize),
    #[error("QP dimension mismatch: {0}")]
    Dimension(&'static str),
}

/// A convex QP in the form above. Infinite bounds are ignored.
#[derive(Debug, Clone)]
pub struct QpProblem {
    pub h: DMatrix<f64>,
    pub g: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub a_in: DMatrix<f64>,
    pub b_in: DVector<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl QpProblem {
    /// Unconstrained problem of dimension `n`.
    pub fn unconstrained(h: DMatrix<f64>, g: DVector<f64>) -> Self {
        let n = g.len();
        Self {
            h,
            g,
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
            a_in: DMatrix::zeros(0, n),
            b_in: DVector::zeros(0),
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    fn check(&self) -> Result<(), QpError> {
        let n = self.dim();
        if self.h.nrows() != n || self.h.ncols() != n {
            return Err(QpError::Dimension("H"));
        }
        if self.a_eq.ncols() != n || self.a_eq.nrows() != self.b_eq.len() {
            return Err(QpError::Dimension("A_eq"));
        }
        if self.a_in.ncols() != n || self.a_in.nrows() != self.b_in.len() {
            return Err(QpError::Dimension("A_in"));
        }
        if self.lower.len() != n || self.upper.len() != n {
            return Err(QpError::Dimension("bounds"));
        }
        Ok(())
    }

    pub fn objective(&self, d: &DVector<f64>) -> f64 {
        0.5 * d.dot(&(&self.h * d)) + self.g.dot(d)
    }
}

/// Solution of a QP subproblem.
///
/// Multipliers satisfy `H d + g = A_eq' l_eq + A_in' l_in + bounds`, with
/// `l_in >= 0`; `bounds[i]` is positive at an active lower bound and negative
/// at an active upper bound.
#[derive(Debug, Clone)]
pub struct QpSolution {
    pub step: DVector<f64>,
    pub lambda_eq: DVector<f64>,
    pub lambda_in: DVector<f64>,
    pub bounds: DVector<f64>,
    /// Sum of elastic slacks; zero unless `elastic`.
    pub slack: f64,
    pub elastic: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
enum RowKind {
    Eq(usize),
    In(usize),
    Lower(usize),
    Upper(usize),
}

struct Rows<'a> {
    qp: &'a QpProblem,
    kinds: Vec<RowKind>,
}

impl<'a> Rows<'a> {
    fn new(qp: &'a QpProblem) -> Self {
        let mut kinds = Vec::new();
        kinds.extend((0..qp.a_eq.nrows()).map(RowKind::Eq));
        kinds.extend((0..qp.a_in.nrows()).map(RowKind::In));
        for i in 0..qp.dim() {
            if qp.lower[i].is_finite() {
                kinds.push(RowKind::Lower(i));
            }
            if qp.upper[i].is_finite() {
                kinds.push(RowKind::Upper(i));
            }
        }
        Self { qp, kinds }
    }

    fn is_eq(&self, k: usize) -> bool {
        matches!(self.kinds[k], RowKind::Eq(_))
    }

    /// Residual n'x - b, with the sign chosen so that feasibility is >= 0.
    fn slack(&self, k: usize, x: &DVector<f64>) -> f64 {
        match self.kinds[k] {
            RowKind::Eq(i) => self.qp.a_eq.row(i).transpose().dot(x) - self.qp.b_eq[i],
            RowKind::In(i) => self.qp.a_in.row(i).transpose().dot(x) - self.qp.b_in[i],
            RowKind::Lower(i) => x[i] - self.qp.lower[i],
            RowKind::Upper(i) => self.qp.upper[i] - x[i],
        }
    }

    fn norm(&self, k: usize) -> f64 {
        match self.kinds[k] {
            RowKind::Eq(i) => self.qp.a_eq.row(i).norm(),
            RowKind::In(i) => self.qp.a_in.row(i).norm(),
            _ => 1.0,
        }
    }

    fn scale(&self, k: usize) -> f64 {
        match self.kinds[k] {
            RowKind::Eq(i) => self.qp.b_eq[i].abs(),
            RowKind::In(i) => self.qp.b_in[i].abs(),
            RowKind::Lower(i) => self.qp.lower[i].abs(),
            RowKind::Upper(i) => self.qp.upper[i].abs(),
        }
    }

    /// J' n for the row normal n (times `sign`).
    fn project(&self, k: usize, j: &DMatrix<f64>, sign: f64) -> DVector<f64> {
        match self.kinds[k] {
            RowKind::Eq(i) => j.tr_mul(&self.qp.a_eq.row(i).transpose()) * sign,
            RowKind::In(i) => j.tr_mul(&self.qp.a_in.row(i).transpose()) * sign,
            RowKind::Lower(i) => j.row(i).transpose() * sign,
            RowKind::Upper(i) => j.row(i).transpose() * (-sign),
        }
    }
}

/// Given a rotation that zeroes `b` in (a, b), returns (c, s, r).
fn givens(a: f64, b: f64) -> (f64, f64, f64) {
    let r = a.hypot(b);
    if r == 0.0 {
        (1.0, 0.0, 0.0)
    } else {
        (a / r, b / r, r)
    }
}

fn rotate_cols(m: &mut DMatrix<f64>, i: usize, j: usize, c: f64, s: f64) {
    for row in 0..m.nrows() {
        let (a, b) = (m[(row, i)], m[(row, j)]);
        m[(row, i)] = c * a + s * b;
        m[(row, j)] = -s * a + c * b;
    }
}

struct Dual {
    n: usize,
    j: DMatrix<f64>,
    r: DMatrix<f64>,
    q: usize,
    active: Vec<usize>,
    signs: Vec<f64>,
    u: Vec<f64>,
}

impl Dual {
    fn add(&mut self, mut d: DVector<f64>, row: usize, sign: f64, mult: f64) {
        let q = self.q;
        for k in (q + 1..self.n).rev() {
            if d[k] == 0.0 {
                continue;
            }
            let (c, s, h) = givens(d[k - 1], d[k]);
            d[k - 1] = h;
            d[k] = 0.0;
            rotate_cols(&mut self.j, k - 1, k, c, s);
        }
        for i in 0..=q {
            self.r[(i, q)] = d[i];
        }
        self.active.push(row);
        self.signs.push(sign);
        self.u.push(mult);
        self.q += 1;
    }

    fn drop(&mut self, pos: usize) {
        let q = self.q;
        for col in pos..q - 1 {
            for i in 0..q {
                self.r[(i, col)] = self.r[(i, col + 1)];
            }
        }
        for i in 0..q {
            self.r[(i, q - 1)] = 0.0;
        }
        self.active.remove(pos);
        self.signs.remove(pos);
        self.u.remove(pos);
        let cols = q - 1;
        for k in pos..cols {
            let (c, s, h) = givens(self.r[(k, k)], self.r[(k + 1, k)]);
            self.r[(k, k)] = h;
            self.r[(k + 1, k)] = 0.0;
            for l in k + 1..cols {
                let (a, b) = (self.r[(k, l)], self.r[(k + 1, l)]);
                self.r[(k, l)] = c * a + s * b;
                self.r[(k + 1, l)] = -s * a + c * b;
            }
            rotate_cols(&mut self.j, k, k + 1, c, s);
        }
        self.q -= 1;
    }

    /// Solves R[0..q, 0..q] r = d[0..q].
    fn back_solve(&self, d: &DVector<f64>) -> Vec<f64> {
        let q = self.q;
        let mut r = vec![0.0; q];
        for i in (0..q).rev() {
            let mut s = d[i];
            for k in i + 1..q {
                s -= self.r[(i, k)] * r[k];
            }
            r[i] = s / self.r[(i, i)];
        }
        r
    }
}

struct GiResult {
    x: DVector<f64>,
    mult: Vec<f64>,
    iterations: usize,
}

fn goldfarb_idnani(qp: &QpProblem, max_iter: usize) -> Result<GiResult, QpError> {
    let n = qp.dim();
    let rows = Rows::new(qp);
    let chol = qp.h.clone().cholesky().ok_or(QpError::NotPositiveDefinite)?;
    let linv = chol
        .l()
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .ok_or(QpError::NotPositiveDefinite)?;
    let mut dual = Dual {
        n,
        j: linv.transpose(),
        r: DMatrix::zeros(n, n),
        q: 0,
        active: Vec::new(),
        signs: Vec::new(),
        u: Vec::new(),
    };
    let mut x = chol.solve(&(-&qp.g));
    let mut in_active = vec![false; rows.kinds.len()];
    let xscale = |x: &DVector<f64>| 1.0 + x.amax();
    let mut iterations = 0;

    loop {
        // Most violated row, equalities first, measured in normalised units.
        let tol_base = 1e-12 * xscale(&x);
        let mut pick: Option<(usize, f64)> = None;
        let mut worst = 0.0;
        for k in 0..rows.kinds.len() {
            if in_active[k] || !rows.is_eq(k) {
                continue;
            }
            let s = rows.slack(k, &x);
            let nv = rows.norm(k);
            if nv == 0.0 {
                if s.abs() > 1e-12 * (1.0 + rows.scale(k)) {
                    return Err(QpError::Infeasible);
                }
                continue;
            }
            let tol = tol_base * nv + 1e-12 * rows.scale(k);
            let v = s.abs() / nv;
            if s.abs() > tol && v > worst {
                worst = v;
                pick = Some((k, if s > 0.0 { -1.0 } else { 1.0 }));
            }
        }
        if pick.is_none() {
            for k in 0..rows.kinds.len() {
                if in_active[k] || rows.is_eq(k) {
                    continue;
                }
                let s = rows.slack(k, &x);
                let nv = rows.norm(k);
                if nv == 0.0 {
                    if s < -1e-12 * (1.0 + rows.scale(k)) {
                        return Err(QpError::Infeasible);
                    }
                    continue;
                }
                let tol = tol_base * nv + 1e-12 * rows.scale(k);
                let v = -s / nv;
                if s < -tol && v > worst {
                    worst = v;
                    pick = Some((k, 1.0));
                }
            }
        }
        let Some((p, sign)) = pick else { break };

        let mut u_plus = 0.0;
        loop {
            iterations += 1;
            if iterations > max_iter {
                return Err(QpError::IterationLimit(max_iter));
            }
            let d = rows.project(p, &dual.j, sign);
            let mut z = DVector::zeros(n);
            for k in dual.q..n {
                if d[k] != 0.0 {
                    z.axpy(d[k], &dual.j.column(k), 1.0);
                }
            }
            let r = dual.back_solve(&d);

            let mut t1 = f64::INFINITY;
            let mut drop_pos = None;
            for (pos, &row) in dual.active.iter().enumerate() {
                if !rows.is_eq(row) && r[pos] > 0.0 {
                    let ratio = dual.u[pos] / r[pos];
                    if ratio < t1 {
                        t1 = ratio;
                        drop_pos = Some(pos);
                    }
                }
            }
            // z' n_p equals the squared norm of the null-space part of d.
            let ztn: f64 = (dual.q..n).map(|k| d[k] * d[k]).sum();
            let s_p = sign * rows.slack(p, &x);
            let t2 = if ztn <= 1e-14 * rows.norm(p).powi(2) {
                f64::INFINITY
            } else {
                -s_p / ztn
            };
            let t = t1.min(t2);
            if !t.is_finite() {
                return Err(QpError::Infeasible);
            }
            if !t2.is_finite() {
                for (ui, ri) in dual.u.iter_mut().zip(&r) {
                    *ui -= t * ri;
                }
                u_plus += t;
                dual.drop(drop_pos.expect("finite t1 has a blocking row"));
                in_active = mark(&dual.active, rows.kinds.len());
                continue;
            }
            x.axpy(t, &z, 1.0);
            for (ui, ri) in dual.u.iter_mut().zip(&r) {
                *ui -= t * ri;
            }
            u_plus += t;
            if t2 <= t1 {
                dual.add(d, p, sign, u_plus);
                in_active[p] = true;
                break;
            }
            dual.drop(drop_pos.expect("finite t1 has a blocking row"));
            in_active = mark(&dual.active, rows.kinds.len());
        }
    }

    let mut mult = vec![0.0; rows.kinds.len()];
    for ((&row, &s), &u) in dual.active.iter().zip(&dual.signs).zip(&dual.u) {
        mult[row] = s * u;
    }
    // Map bound multipliers to the signed convention.
    for (k, kind) in rows.kinds.iter().enumerate() {
        if let RowKind::Upper(_) = kind {
            mult[k] = -mult[k];
        }
    }
    Ok(GiResult { x, mult, iterations })
}

fn mark(active: &[usize], m: usize) -> Vec<bool> {
    let mut v = vec![false; m];
    for &a in active {
        v[a] = true;
    }
    v
}

fn unpack(qp: &QpProblem, res: &GiResult) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
    let rows = Rows::new(qp);
    let mut leq = DVector::zeros(qp.a_eq.nrows());
    let mut lin = DVector::zeros(qp.a_in.nrows());
    let mut lb = DVector::zeros(qp.dim());
    for (k, kind) in rows.kinds.iter().enumerate() {
        match *kind {
            RowKind::Eq(i) => leq[i] = res.mult[k],
            RowKind::In(i) => lin[i] = res.mult[k],
            RowKind::Lower(i) | RowKind::Upper(i) => lb[i] += res.mult[k],
        }
    }
    (leq, lin, lb)
}

/// Solves the QP exactly, without elastic fallback.
pub fn solve_strict(qp: &QpProblem, max_iter: usize) -> Result<QpSolution, QpError> {
    qp.check()?;
    let res = goldfarb_idnani(qp, max_iter)?;
    let (lambda_eq, lambda_in, bounds) = unpack(qp, &res);
    Ok(QpSolution {
        step: res.x,
        lambda_eq,
        lambda_in,
        bounds,
        slack: 0.0,
        elastic: false,
        iterations: res.iterations,
    })
}

/// Solves the QP; inconsistent constraints trigger the elastic problem with
/// penalty `penalty` on the l1 norm of the slacks.
pub fn solve_qp(qp: &QpProblem, penalty: f64, max_iter: usize) -> Result<QpSolution, QpError> {
    match solve_strict(qp, max_iter) {
        Err(QpError::Infeasible) => solve_elastic(qp, penalty, max_iter),
        other => other,
    }
}

/// Elastic reformulation: eq rows get slacks p - m, inequality rows get t,
/// all slacks non-negative and penalised linearly plus a small quadratic term
/// that keeps the Hessian positive definite.
pub fn solve_elastic(qp: &QpProblem, penalty: f64, max_iter: usize) -> Result<QpSolution, QpError> {
    qp.check()?;
    let n = qp.dim();
    let me = qp.a_eq.nrows();
    let mi = qp.a_in.nrows();
    let ne = n + 2 * me + mi;
    let reg = 1e-3 * penalty;

    let mut h = DMatrix::zeros(ne, ne);
    h.view_mut((0, 0), (n, n)).copy_from(&qp.h);
    for k in n..ne {
        h[(k, k)] = reg;
    }
    let mut g = DVector::from_element(ne, penalty);
    g.rows_mut(0, n).copy_from(&qp.g);

    let mut a_eq = DMatrix::zeros(me, ne);
    a_eq.view_mut((0, 0), (me, n)).copy_from(&qp.a_eq);
    for i in 0..me {
        a_eq[(i, n + i)] = -1.0;
        a_eq[(i, n + me + i)] = 1.0;
    }
    let mut a_in = DMatrix::zeros(mi, ne);
    a_in.view_mut((0, 0), (mi, n)).copy_from(&qp.a_in);
    for i in 0..mi {
        a_in[(i, n + 2 * me + i)] = 1.0;
    }
    let mut lower = qp.lower.clone();
    lower.extend(std::iter::repeat_n(0.0, ne - n));
    let mut upper = qp.upper.clone();
    upper.extend(std::iter::repeat_n(f64::INFINITY, ne - n));

    let elastic = QpProblem {
        h,
        g,
        a_eq,
        b_eq: qp.b_eq.clone(),
        a_in,
        b_in: qp.b_in.clone(),
        lower,
        upper,
    };
    let res = goldfarb_idnani(&elastic, max_iter)?;
    let (lambda_eq, lambda_in, b_all) = unpack(&elastic, &res);
    let slack = res.x.rows(n, ne - n).iter().sum();
    Ok(QpSolution {
        step: res.x.rows(0, n).into_owned(),
        lambda_eq,
        lambda_in,
        bounds: b_all.rows(0, n).into_owned(),
        slack,
        elastic: true,
        iterations: res.iterations,
    })
}

/// Largest violation of the QP's KKT conditions at `sol`.
pub fn kkt_error(qp: &QpProblem, sol: &QpSolution) -> f64 {
    let d = &sol.step;
    let grad = &qp.h * d + &qp.g
        - qp.a_eq.tr_mul(&sol.lambda_eq)
        - qp.a_in.tr_mul(&sol.lambda_in)
        - &sol.bounds;
    let mut err = grad.amax();
    let req = &qp.a_eq * d - &qp.b_eq;
    if !sol.elastic {
        err = err.max(req.amax());
    }
    let rin = &qp.a_in * d - &qp.b_in;
    for i in 0..rin.len() {
        if !sol.elastic {
            err = err.max((-rin[i]).max(0.0));
        }
        err = err.max((-sol.lambda_in[i]).max(0.0));
        err = err.max((sol.lambda_in[i] * rin[i]).abs());
    }
    for i in 0..d.len() {
        let b = sol.bounds[i];
        err = err.max((qp.lower[i] - d[i]).max(0.0)).max((d[i] - qp.upper[i]).max(0.0));
        if b > 0.0 {
            err = err.max((b * (d[i] - qp.lower[i])).abs());
        } else if b < 0.0 {
            err = err.max((b * (qp.upper[i] - d[i])).abs());
        }
    }
    err
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn newton_step() {
        let qp = QpProblem::unconstrained(DMatrix::identity(2, 2), DVector::from_vec(vec![-1.0, -1.0]));
        let s = solve_strict(&qp, 100).unwrap();
        assert!((s.step[0] - 1.0).abs() < 1e-15 && (s.step[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn projected_step() {
        let mut qp =
            QpProblem::unconstrained(DMatrix::identity(2, 2), DVector::from_vec(vec![-1.0, -1.0]));
        qp.a_eq = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        qp.b_eq = DVector::from_vec(vec![0.0]);
        let s = solve_strict(&qp, 100).unwrap();
        assert!(s.step[0].abs() < 1e-15 && (s.step[1] - 1.0).abs() < 1e-15);
        assert!((s.lambda_eq[0] + 1.0).abs() < 1e-14);
        assert!(kkt_error(&qp, &s) < 1e-12);
    }

    #[test]
    fn bounds_and_rows() {
        // min (x-2)^2 + (y-2)^2, x + y <= 1, x >= 0.8.
        let mut qp = QpProblem::unconstrained(
            DMatrix::identity(2, 2) * 2.0,
            DVector::from_vec(vec![-4.0, -4.0]),
        );
        qp.a_in = DMatrix::from_row_slice(1, 2, &[-1.0, -1.0]);
        qp.b_in = DVector::from_vec(vec![-1.0]);
        qp.lower = vec![0.8, f64::NEG_INFINITY];
        let s = solve_strict(&qp, 100).unwrap();
        assert!((s.step[0] - 0.8).abs() < 1e-12);
        assert!((s.step[1] - 0.2).abs() < 1e-12);
        assert!(s.bounds[0] > 0.0);
        assert!(kkt_error(&qp, &s) < 1e-12);
    }

    #[test]
    fn inconsistent_goes_elastic() {
        let mut qp = QpProblem::unconstrained(DMatrix::identity(1, 1), DVector::zeros(1));
        qp.a_eq = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        qp.b_eq = DVector::from_vec(vec![0.0, 1.0]);
        assert_eq!(solve_strict(&qp, 100).unwrap_err(), QpError::Infeasible);
        let s = solve_qp(&qp, 100.0, 1000).unwrap();
        assert!(s.elastic);
        assert!((s.slack - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_indefinite() {
        let qp = QpProblem::unconstrained(-DMatrix::identity(2, 2), DVector::zeros(2));
        assert_eq!(solve_strict(&qp, 10).unwrap_err(), QpError::NotPositiveDefinite);
    }
}
