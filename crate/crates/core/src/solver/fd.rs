//! Finite-difference gradients and column-grouped Jacobians.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FdScheme {
    #[default]
    Forward,
    Central,
}

impl FdScheme {
    /// Base relative step: sqrt(eps) for forward, cbrt(eps) for central.
    pub fn base_step(self) -> f64 {
        match self {
            FdScheme::Forward => f64::EPSILON.sqrt(),
            FdScheme::Central => f64::EPSILON.cbrt(),
        }
    }
}

/// Plus and minus step lengths for one coordinate, respecting bounds when
/// possible. Exactly one side may be zero.
fn steps(scheme: FdScheme, x: f64, lo: f64, hi: f64, rel: f64) -> (f64, f64) {
    let h = rel * (1.0 + x.abs());
    let up = x + h <= hi;
    let down = x - h >= lo;
    match scheme {
        FdScheme::Central if up && down => (h, h),
        _ if up || !down => (h, 0.0),
        _ => (0.0, h),
    }
}

/// Gradient of `f` at `x`, one perturbation per coordinate.
pub fn gradient<F>(
    f: &F,
    x: &[f64],
    f0: f64,
    lower: &[f64],
    upper: &[f64],
    scheme: FdScheme,
    rel: f64,
) -> Result<Vec<f64>, EvalError>
where
    F: Fn(&[f64]) -> Result<f64, EvalError> + Sync,
{
    (0..x.len())
        .into_par_iter()
        .map(|i| {
            let (a, b) = steps(scheme, x[i], lower[i], upper[i], rel);
            let mut xp = x.to_vec();
            let fp = if a > 0.0 {
                xp[i] = x[i] + a;
                f(&xp)?
            } else {
                f0
            };
            let fm = if b > 0.0 {
                xp[i] = x[i] - b;
                f(&xp)?
            } else {
                f0
            };
            Ok((fp - fm) / (a + b))
        })
        .collect()
}

/// Greedy column grouping: columns in a group touch disjoint rows, so one
/// perturbation per group recovers all of them.
pub fn color_columns(structure: &[Vec<usize>], n_rows: usize) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut used: Vec<Vec<bool>> = Vec::new();
    for (col, rows) in structure.iter().enumerate() {
        let slot = used
            .iter()
            .position(|mask| rows.iter().all(|&r| !mask[r]));
        let g = match slot {
            Some(g) => g,
            None => {
                groups.push(Vec::new());
                used.push(vec![false; n_rows]);
                groups.len() - 1
            }
        };
        groups[g].push(col);
        for &r in rows {
            used[g][r] = true;
        }
    }
    groups
}

/// Jacobian of a vector function `c: R^n -> R^m` using grouped perturbations.
///
/// `structure[j]` lists the rows that column `j` can affect. With `None`
/// every column is its own group.
#[allow(clippy::too_many_arguments)]
pub fn jacobian<C>(
    c: &C,
    x: &[f64],
    c0: &[f64],
    lower: &[f64],
    upper: &[f64],
    structure: Option<&[Vec<usize>]>,
    scheme: FdScheme,
    rel: f64,
) -> Result<DMatrix<f64>, EvalError>
where
    C: Fn(&[f64]) -> Result<Vec<f64>, EvalError> + Sync,
{
    let n = x.len();
    let m = c0.len();
    let dense: Vec<Vec<usize>>;
    let structure = match structure {
        Some(s) => s,
        None => {
            dense = vec![(0..m).collect(); n];
            &dense
        }
    };
    let groups = match structure.len() == n {
        true => color_columns(structure, m),
        false => (0..n).map(|j| vec![j]).collect(),
    };
    let blocks: Vec<Vec<(usize, Vec<(usize, f64)>)>> = groups
        .par_iter()
        .map(|group| {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            let mut st = Vec::with_capacity(group.len());
            let mut need_minus = false;
            for &j in group {
                let (a, b) = steps(scheme, x[j], lower[j], upper[j], rel);
                xp[j] += a;
                xm[j] -= b;
                need_minus |= b > 0.0;
                st.push((j, a, b));
            }
            let need_plus = st.iter().any(|s| s.1 > 0.0);
            let cp = if need_plus { c(&xp)? } else { c0.to_vec() };
            let cm = if need_minus { c(&xm)? } else { c0.to_vec() };
            Ok(st
                .into_iter()
                .map(|(j, a, b)| {
                    let rows = &structure[j];
                    let col = rows
                        .iter()
                        .map(|&r| (r, (cp[r] - cm[r]) / (a + b)))
                        .collect();
                    (j, col)
                })
                .collect())
        })
        .collect::<Result<_, EvalError>>()?;
    let mut jac = DMatrix::zeros(m, n);
    for block in blocks {
        for (j, col) in block {
            for (r, v) in col {
                jac[(r, j)] = v;
            }
        }
    }
    Ok(jac)
}
