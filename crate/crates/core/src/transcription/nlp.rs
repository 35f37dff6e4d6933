use serde::Serialize;

use crate::constraints::{build_actuator_bounds, Interval};
use crate::solver::{EvalError, Nlp};

use super::{
    boundary_constraints, cost_factors, defect_constraints, objective, path_constraints,
    CollisionMode, DecisionVector, Layout, ObjectiveMode, OcpSpec, TranscriptionError,
};

const STATE_NAMES: [&str; 6] = ["x", "y", "psi", "u", "v", "r"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RowGroup {
    Defect,
    Initial,
    Terminal,
    SpeedLower,
    SpeedUpper,
    Collision,
}

/// Semantic description of one constraint row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RowInfo {
    pub group: RowGroup,
    /// Segment index for defects, knot index otherwise.
    pub index: usize,
    /// State component or domain vertex; zero where meaningless.
    pub component: usize,
    pub equality: bool,
}

impl RowInfo {
    pub fn label(&self) -> String {
        match self.group {
            RowGroup::Defect => format!("defect[{}].{}", self.index, STATE_NAMES[self.component]),
            RowGroup::Initial => format!("initial.{}", STATE_NAMES[self.component]),
            RowGroup::Terminal => format!("terminal.{}", STATE_NAMES[self.component]),
            RowGroup::SpeedLower => format!("speed_lower[{}]", self.index),
            RowGroup::SpeedUpper => format!("speed_upper[{}]", self.index),
            RowGroup::Collision if self.equality => {
                format!("collision[{}][{}]", self.index, self.component)
            }
            RowGroup::Collision => format!("collision[{}]", self.index),
        }
    }
}

/// The transcribed NLP. Path rows are placed at interior knots; the end
/// knots are pinned by the boundary rows and checked by `OcpSpec::validate`.
#[derive(Debug, Clone)]
pub struct OcpNlp {
    pub spec: OcpSpec,
    pub layout: Layout,
    rows: Vec<RowInfo>,
    n_eq: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    scale: Vec<f64>,
}

pub fn build_nlp(spec: &OcpSpec) -> Result<OcpNlp, TranscriptionError> {
    spec.validate()?;
    let layout = spec.layout();
    let n_s = spec.segments;
    let flags = spec.flags;
    let interior = 1..n_s;

    let mut eq = Vec::new();
    for k in 0..n_s {
        for c in 0..6 {
            eq.push(RowInfo { group: RowGroup::Defect, index: k, component: c, equality: true });
        }
    }
    for (group, index) in [(RowGroup::Initial, 0), (RowGroup::Terminal, n_s)] {
        for c in 0..6 {
            eq.push(RowInfo { group, index, component: c, equality: true });
        }
    }
    let mut ineq = Vec::new();
    for k in interior.clone() {
        if flags.speed_constraint {
            for group in [RowGroup::SpeedLower, RowGroup::SpeedUpper] {
                ineq.push(RowInfo { group, index: k, component: 0, equality: false });
            }
        }
        if flags.collision {
            match flags.collision_mode {
                CollisionMode::Smooth => ineq.push(RowInfo {
                    group: RowGroup::Collision,
                    index: k,
                    component: 0,
                    equality: false,
                }),
                CollisionMode::Winding => {
                    for j in 0..spec.domain_vertices {
                        eq.push(RowInfo {
                            group: RowGroup::Collision,
                            index: k,
                            component: j,
                            equality: true,
                        });
                    }
                }
            }
        }
    }
    let n_eq = eq.len();
    eq.extend(ineq);

    let n = layout.dim();
    let mut lower = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut scale = vec![1.0; n];
    (lower[0], upper[0]) = spec.tf_bounds;
    scale[0] = 100.0;

    let p = &spec.ship.particulars;
    let (l, cap) = (p.length, p.speed_cap);
    let (bx0, by0, bx1, by1) = spec.port.bounding_box();
    let psi_lo = spec.x0.psi.min(spec.xf.psi) - 2.0 * std::f64::consts::PI;
    let psi_hi = spec.x0.psi.max(spec.xf.psi) + 2.0 * std::f64::consts::PI;
    let r_cap = 2.0 * cap / l;
    let boxes = [
        Interval::new(bx0, bx1),
        Interval::new(by0, by1),
        Interval::new(psi_lo, psi_hi),
        Interval::new(-cap, cap),
        Interval::new(-cap, cap),
        Interval::new(-r_cap, r_cap),
    ];
    let state_scale = [l, l, 1.0, cap, cap, cap / l];
    for (which, s) in [("initial", &spec.x0), ("terminal", &spec.xf)] {
        if !s.to_array().iter().zip(&boxes).all(|(v, b)| b.contains(*v)) {
            return Err(TranscriptionError::Invalid(format!(
                "{which} state outside the state box (|u|, |v| <= {cap}, |r| <= {r_cap})"
            )));
        }
    }
    for k in 0..layout.knots() {
        for c in 0..6 {
            let i = layout.state_index(k, c);
            lower[i] = boxes[c].lo;
            upper[i] = boxes[c].hi;
            scale[i] = state_scale[c];
        }
    }
    let bounds = build_actuator_bounds(&spec.ship).as_array();
    for k in 0..n_s {
        for (slot, &ch) in layout.channels().iter().enumerate() {
            let i = layout.control_index(k, slot);
            lower[i] = bounds[ch].lo;
            upper[i] = bounds[ch].hi;
            let m = bounds[ch].lo.abs().max(bounds[ch].hi.abs());
            scale[i] = if m > 0.0 { m } else { 1.0 };
        }
    }

    Ok(OcpNlp {
        spec: spec.clone(),
        layout,
        rows: eq,
        n_eq,
        lower,
        upper,
        scale,
    })
}

impl OcpNlp {
    /// Every row, equalities first.
    pub fn rows(&self) -> &[RowInfo] {
        &self.rows
    }

    pub fn count(&self, group: RowGroup) -> usize {
        self.rows.iter().filter(|r| r.group == group).count()
    }

    pub fn unpack(&self, x: &[f64]) -> Result<DecisionVector, TranscriptionError> {
        self.layout.unpack(x)
    }

    fn interior_states<'a>(&self, dv: &'a DecisionVector) -> &'a [crate::dynamics::State] {
        &dv.states[1..self.spec.segments]
    }

    /// All constraint rows, equalities first.
    pub fn evaluate_rows(&self, x: &[f64]) -> Result<Vec<f64>, TranscriptionError> {
        let dv = self.unpack(x)?;
        let mut eq = defect_constraints(&dv, &self.spec)?;
        eq.extend(boundary_constraints(&dv, &self.spec));
        let path = path_constraints(self.interior_states(&dv), &self.spec)?;
        eq.extend(&path.winding);
        let mut ineq = Vec::with_capacity(self.rows.len() - self.n_eq);
        // Rows are interleaved per knot: speed pair, then collision.
        let per_knot = self.spec.flags.collision && self.spec.flags.collision_mode == CollisionMode::Smooth;
        for k in 0..self.spec.segments - 1 {
            if let Some((lo, hi)) = path.speed.get(k) {
                ineq.push(*lo);
                ineq.push(*hi);
            }
            if per_knot {
                ineq.push(path.surrogate[k]);
            }
        }
        eq.extend(ineq);
        Ok(eq)
    }

    /// Rows that variable `col` can influence. Commands influence every later
    /// segment through the actuator state carried across segments.
    fn column_rows(&self, col: usize) -> Vec<usize> {
        let n_s = self.spec.segments;
        let lay = &self.layout;
        if col == 0 {
            return (0..6 * n_s).collect();
        }
        if col >= lay.control_offset() {
            let k = (col - lay.control_offset()) / lay.n_u();
            return (6 * k..6 * n_s).collect();
        }
        let k = (col - 1) / 6;
        let c = (col - 1) % 6;
        self.rows
            .iter()
            .enumerate()
            .filter(|(_, r)| match r.group {
                RowGroup::Defect => r.index == k || (r.index + 1 == k && r.component == c),
                RowGroup::Initial => k == 0 && r.component == c,
                RowGroup::Terminal => k == n_s && r.component == c,
                _ => r.index == k,
            })
            .map(|(i, _)| i)
            .collect()
    }
}

fn eval_err(e: TranscriptionError) -> EvalError {
    EvalError::new(e.to_string())
}

impl Nlp for OcpNlp {
    fn n_vars(&self) -> usize {
        self.layout.dim()
    }

    fn n_eq(&self) -> usize {
        self.n_eq
    }

    fn n_ineq(&self) -> usize {
        self.rows.len() - self.n_eq
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (self.lower.clone(), self.upper.clone())
    }

    fn objective(&self, x: &[f64]) -> Result<f64, EvalError> {
        let dv = self.unpack(x).map_err(eval_err)?;
        Ok(objective(&dv, &self.spec))
    }

    fn constraints(&self, x: &[f64], eq: &mut [f64], ineq: &mut [f64]) -> Result<(), EvalError> {
        let rows = self.evaluate_rows(x).map_err(eval_err)?;
        eq.copy_from_slice(&rows[..self.n_eq]);
        ineq.copy_from_slice(&rows[self.n_eq..]);
        Ok(())
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        let dv = self.unpack(x).ok()?;
        let spec = &self.spec;
        let w = spec.weights();
        let (terminal, integral) = cost_factors(&dv, spec);
        let (dt_factor, di_factor) = match spec.flags.objective {
            ObjectiveMode::Product => (integral, terminal),
            ObjectiveMode::Sum => (1.0, 1.0),
        };
        let n_s = spec.segments;
        let dt = dv.tf / n_s as f64;
        let mut g = vec![0.0; x.len()];
        g[0] = di_factor * integral / dv.tf;
        for (k, s) in dv.states.iter().enumerate() {
            let e = *s - spec.xf;
            let quad = if k == 0 || k == n_s { 0.5 * dt } else { dt };
            for i in 0..6 {
                let de = 2.0 * w[i] * e[i];
                let mut v = di_factor * quad * de;
                if k == n_s {
                    v += dt_factor * de;
                }
                g[self.layout.state_index(k, i)] = v;
            }
        }
        Some(g)
    }

    fn variable_scale(&self) -> Vec<f64> {
        self.scale.clone()
    }

    fn jacobian_structure(&self) -> Option<Vec<Vec<usize>>> {
        Some((0..self.n_vars()).map(|c| self.column_rows(c)).collect())
    }

    fn row_label(&self, row: usize) -> String {
        self.rows.get(row).map_or_else(|| format!("row[{row}]"), RowInfo::label)
    }
}
