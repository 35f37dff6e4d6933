//! Single-scenario pipeline: transcribe, solve with recomputation, audit.

use crate::audit::{audit_trajectory, AuditReport};
use crate::scenarios::{solve_attempts, AttemptResult, RecomputePolicy, ScenarioError};
use crate::solver::{SolverOptions, SolverResult};
use crate::transcription::{
    build_nlp, default_tf_guess, linear_initial_guess, DecisionVector, OcpNlp, OcpSpec,
};

/// Constraint tolerance of the independent audit.
pub const AUDIT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct PlanOutcome {
    pub nlp: OcpNlp,
    pub attempts: Vec<AttemptResult>,
    /// Full solver output of the last attempt.
    pub result: SolverResult,
    pub trajectory: DecisionVector,
    pub audit: AuditReport,
}

impl PlanOutcome {
    pub fn feasible(&self) -> bool {
        self.result.status.is_feasible()
    }

    pub fn audit_passes(&self) -> bool {
        self.audit.passes(AUDIT_TOLERANCE)
    }
}

pub fn plan(
    spec: &OcpSpec,
    tf_guess: Option<f64>,
    policy: &RecomputePolicy,
    opts: &SolverOptions,
) -> Result<PlanOutcome, ScenarioError> {
    let nlp = build_nlp(spec)?;
    let tf0 = tf_guess
        .map(|t| t.clamp(spec.tf_bounds.0, spec.tf_bounds.1))
        .unwrap_or_else(|| default_tf_guess(spec));
    let base = nlp.layout.pack(&linear_initial_guess(spec, tf0)?)?;
    let (attempts, result) = solve_attempts(&nlp, &base, policy, opts)?;
    let trajectory = nlp.layout.unpack(&result.x)?;
    let audit = audit_trajectory(spec, &trajectory);
    Ok(PlanOutcome { nlp, attempts, result, trajectory, audit })
}
