use crate::dynamics::{ControlCommand, State};

use super::TranscriptionError;

/// Unpacked decision vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionVector {
    pub tf: f64,
    /// N_k knot states.
    pub states: Vec<State>,
    /// N_s knot commands. With a fixed propeller the propeller entry is
    /// not a decision variable.
    pub controls: Vec<ControlCommand>,
}

/// Flat layout `[tf, x_1 .. x_{N_k}, u_1 .. u_{N_s}]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layout {
    pub segments: usize,
    fixed_propeller: Option<f64>,
}

impl Layout {
    pub fn new(segments: usize, fixed_propeller: Option<f64>) -> Self {
        Self {
            segments,
            fixed_propeller,
        }
    }

    pub fn knots(&self) -> usize {
        self.segments + 1
    }

    /// Decision controls per knot.
    pub fn n_u(&self) -> usize {
        if self.fixed_propeller.is_some() {
            3
        } else {
            4
        }
    }

    pub fn dim(&self) -> usize {
        1 + 6 * self.knots() + self.n_u() * self.segments
    }

    pub fn state_index(&self, knot: usize, component: usize) -> usize {
        1 + 6 * knot + component
    }

    pub fn control_offset(&self) -> usize {
        1 + 6 * self.knots()
    }

    /// Command channels stored for one knot, in `ControlCommand` order.
    pub fn channels(&self) -> &'static [usize] {
        if self.fixed_propeller.is_some() {
            &[0, 1, 3]
        } else {
            &[0, 1, 2, 3]
        }
    }

    pub fn control_index(&self, knot: usize, slot: usize) -> usize {
        self.control_offset() + self.n_u() * knot + slot
    }

    pub fn pack(&self, dv: &DecisionVector) -> Result<Vec<f64>, TranscriptionError> {
        if dv.states.len() != self.knots() {
            return Err(TranscriptionError::Dimension {
                expected: self.knots(),
                got: dv.states.len(),
            });
        }
        if dv.controls.len() != self.segments {
            return Err(TranscriptionError::Dimension {
                expected: self.segments,
                got: dv.controls.len(),
            });
        }
        let mut out = Vec::with_capacity(self.dim());
        out.push(dv.tf);
        for s in &dv.states {
            out.extend(s.to_array());
        }
        for c in &dv.controls {
            let a = c.to_array();
            out.extend(self.channels().iter().map(|&j| a[j]));
        }
        Ok(out)
    }

    pub fn unpack(&self, x: &[f64]) -> Result<DecisionVector, TranscriptionError> {
        if x.len() != self.dim() {
            return Err(TranscriptionError::Dimension {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let states = (0..self.knots())
            .map(|k| State::from_slice(&x[self.state_index(k, 0)..self.state_index(k, 6)]))
            .collect();
        let n_u = self.n_u();
        let controls = x[self.control_offset()..]
            .chunks_exact(n_u)
            .map(|chunk| {
                let mut a = [0.0, 0.0, self.fixed_propeller.unwrap_or(0.0), 0.0];
                for (&j, v) in self.channels().iter().zip(chunk) {
                    a[j] = *v;
                }
                ControlCommand::from_array(a)
            })
            .collect();
        Ok(DecisionVector {
            tf: x[0],
            states,
            controls,
        })
    }
}
