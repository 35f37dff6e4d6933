//! The six harbour approach cases, the random case generator and the
//! recomputation-based feasibility study.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::{berth_distance, build_actuator_bounds, speed_limits};
use crate::dynamics::{State, WindCondition};
use crate::geometry::domain_inside;
use crate::solver::{solve, SolverOptions, SolverResult, SolverStatus};
use crate::transcription::{build_nlp, default_tf_guess, linear_initial_guess, OcpNlp, OcpSpec, TranscriptionError};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown case id {0}; expected 1..=6")]
    UnknownCase(u32),
    #[error("no acceptable random case after {0} draws")]
    RejectionCap(usize),
    #[error("at most {max} attempts per case, got {got}")]
    TooManyAttempts { max: usize, got: usize },
    #[error("n_cases must be at least 1")]
    NoCases,
    #[error(transparent)]
    Transcription(#[from] TranscriptionError),
}

/// Maximum attempts per case: the first solve plus three recomputations.
pub const MAX_ATTEMPTS: usize = 4;
pub const REJECTION_CAP: usize = 10_000;

/// Rows of the initial-condition table: (x0, u, y0, v, ψ, r, γ_T [deg], U_T).
/// Headings are tabulated to two decimals.
#[allow(clippy::approx_constant)]
pub const CASE_TABLE: [[f64; 8]; 6] = [
    [60.0, 0.74, 0.0, 0.0, 3.14, 0.0, 0.0, 1.0],
    [55.2, 0.58, -6.0, 0.0, 2.36, 0.0, 45.0, 0.75],
    [57.6, 0.58, 10.0, 0.0, 3.93, 0.0, 250.0, 0.5],
    [52.8, 0.47, -10.0, 0.0, 1.57, 0.0, 45.0, 0.25],
    [24.0, 0.34, 6.0, 0.0, 3.77, 0.0, 90.0, 0.5],
    [28.8, 0.29, 0.0, 0.0, 3.14, 0.0, 315.0, 0.75],
];

const DESCRIPTIONS: [&str; 6] = [
    "head-on approach to the entrance",
    "oblique approach to the entrance",
    "oblique approach from the opposite side of the berth",
    "parallel to the entrance, perpendicular to the berth",
    "past the entrance, angular approach to the berth",
    "past the entrance, parallel approach to the berth",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseDefinition {
    pub id: u32,
    pub initial: State,
    pub wind_direction_deg: f64,
    pub wind_speed: f64,
    pub description: &'static str,
}

impl CaseDefinition {
    pub fn wind(&self) -> WindCondition {
        WindCondition::from_degrees(self.wind_speed, self.wind_direction_deg)
    }
}

pub fn case_config(id: u32) -> Result<CaseDefinition, ScenarioError> {
    if !(1..=6).contains(&id) {
        return Err(ScenarioError::UnknownCase(id));
    }
    let row = CASE_TABLE[id as usize - 1];
    Ok(CaseDefinition {
        id,
        initial: State::new(row[0], row[2], row[4], row[1], row[3], row[5]),
        wind_direction_deg: row[6],
        wind_speed: row[7],
        description: DESCRIPTIONS[id as usize - 1],
    })
}

/// Base vector of the generator, in table order (x0, u, y0, v, ψ, r).
#[allow(clippy::approx_constant)]
pub const RANDOM_BASE: [f64; 6] = [24.0, 0.29, -5.0, 0.0, 3.14, 0.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomCase {
    pub seed: u64,
    pub index: u64,
    pub multipliers: [f64; 6],
    /// Which heading branch produced v5 (1..=4).
    pub branch: u8,
    pub initial: State,
    pub wind_direction_deg: f64,
    pub wind_speed: f64,
    /// Multiplier draws until acceptance, including the accepted one.
    pub draws: usize,
}

impl RandomCase {
    pub fn wind(&self) -> WindCondition {
        WindCondition::from_degrees(self.wind_speed, self.wind_direction_deg)
    }
}

/// Heading branch for given v1 and v3.
pub fn heading_branch(v1: f64, v3: f64) -> (u8, (f64, f64)) {
    if v1 <= 1.0 && v3 >= 0.0 {
        (1, (0.5, 0.85))
    } else if v1 < 1.0 && v3 < 0.0 {
        (2, (1.35, 1.50))
    } else if v1 > 1.0 && v3 < 0.0 {
        (3, (1.0, 1.5))
    } else {
        (4, (0.5, 1.0))
    }
}

/// One multiplier vector and its branch.
pub fn draw_multipliers<R: Rng>(rng: &mut R) -> ([f64; 6], u8) {
    let v1 = rng.gen_range(0.2..=3.0);
    let v2 = rng.gen_range(0.2..=2.54);
    let v3 = rng.gen_range(-6.0..=4.0);
    let v4 = rng.gen_range(0.1..=1.0);
    let (branch, (lo, hi)) = heading_branch(v1, v3);
    let v5 = rng.gen_range(lo..=hi);
    let v6 = rng.gen_range(0.1..=1.0);
    ([v1, v2, v3, v4, v5, v6], branch)
}

/// Hadamard product with the base vector, reordered to `State` layout.
pub fn multiplied_state(v: &[f64; 6]) -> State {
    let x: Vec<f64> = v.iter().zip(RANDOM_BASE).map(|(a, b)| a * b).collect();
    State::new(x[0], x[2], x[4], x[1], x[3], x[5])
}

/// Containment of the ship domain and the corridor at t = 0.
pub fn initial_condition_acceptable(state: &State, template: &OcpSpec) -> bool {
    let inside = domain_inside(state, &template.port, &template.ship, template.domain_vertices).unwrap_or(false);
    let (lo, hi) = speed_limits(berth_distance(state, template.berth()), &template.ship, &template.coeffs);
    inside && lo <= state.u && state.u <= hi
}

/// Per-case random stream: one seed, one stream per index.
pub fn case_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn generate_random_case(seed: u64, index: u64, template: &OcpSpec) -> Result<RandomCase, ScenarioError> {
    let mut rng = case_rng(seed, index);
    for draws in 1..=REJECTION_CAP {
        let (v, branch) = draw_multipliers(&mut rng);
        let initial = multiplied_state(&v);
        if !initial_condition_acceptable(&initial, template) {
            continue;
        }
        let wind_direction_deg = rng.gen_range(0.0..=360.0);
        let wind_speed = rng.gen_range(0.0..=1.0);
        return Ok(RandomCase {
            seed,
            index,
            multipliers: v,
            branch,
            initial,
            wind_direction_deg,
            wind_speed,
            draws,
        });
    }
    Err(ScenarioError::RejectionCap(REJECTION_CAP))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecomputePolicy {
    /// Total solver calls per case, 1..=4.
    pub attempts: usize,
    /// Seed of the control re-initialisation draws.
    pub seed: u64,
}

impl Default for RecomputePolicy {
    fn default() -> Self {
        Self { attempts: MAX_ATTEMPTS, seed: 0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AttemptResult {
    pub attempt: usize,
    pub status: SolverStatus,
    pub tf: f64,
    pub iterations: usize,
    pub max_violation: f64,
    pub objective: f64,
    #[serde(skip)]
    pub wall_time: f64,
    #[serde(skip)]
    pub x: Vec<f64>,
    #[serde(skip)]
    pub guess: Vec<f64>,
    pub message: String,
}

/// Replaces the command part of `guess` with uniform draws within the
/// actuator bounds; tf and states are kept.
pub fn reinitialize_controls<R: Rng>(nlp: &OcpNlp, guess: &[f64], rng: &mut R) -> Vec<f64> {
    let bounds = build_actuator_bounds(&nlp.spec.ship).as_array();
    let lay = &nlp.layout;
    let mut out = guess.to_vec();
    for k in 0..lay.segments {
        for (slot, &ch) in lay.channels().iter().enumerate() {
            let b = bounds[ch];
            out[lay.control_index(k, slot)] = if b.hi > b.lo { rng.gen_range(b.lo..=b.hi) } else { b.lo };
        }
    }
    out
}

/// Guess for attempt `attempt` under `policy`.
pub fn attempt_guess(nlp: &OcpNlp, base: &[f64], policy: &RecomputePolicy, attempt: usize) -> Vec<f64> {
    if attempt == 0 {
        base.to_vec()
    } else {
        reinitialize_controls(nlp, base, &mut case_rng(policy.seed, attempt as u64))
    }
}

/// Solves from `base`, then re-initialises the commands until a feasible
/// result or the attempt cap. Returns every attempt and the last full result.
pub fn solve_attempts(
    nlp: &OcpNlp,
    base: &[f64],
    policy: &RecomputePolicy,
    opts: &SolverOptions,
) -> Result<(Vec<AttemptResult>, SolverResult), ScenarioError> {
    if policy.attempts == 0 || policy.attempts > MAX_ATTEMPTS {
        return Err(ScenarioError::TooManyAttempts { max: MAX_ATTEMPTS, got: policy.attempts });
    }
    let mut out = Vec::new();
    let mut last = None;
    for attempt in 0..policy.attempts {
        let guess = attempt_guess(nlp, base, policy, attempt);
        let start = Instant::now();
        let r = solve(nlp, &guess, opts);
        out.push(AttemptResult {
            attempt,
            status: r.status,
            tf: r.x[0],
            iterations: r.iterations,
            max_violation: r.max_violation,
            objective: r.objective,
            wall_time: start.elapsed().as_secs_f64(),
            x: r.x.clone(),
            guess,
            message: r.message.clone(),
        });
        let feasible = r.status.is_feasible();
        last = Some(r);
        if feasible {
            break;
        }
    }
    Ok((out, last.expect("at least one attempt")))
}

/// [`solve_attempts`] from the linear guess.
pub fn run_with_recomputation(
    spec: &OcpSpec,
    policy: &RecomputePolicy,
    opts: &SolverOptions,
) -> Result<Vec<AttemptResult>, ScenarioError> {
    let nlp = build_nlp(spec)?;
    let base = nlp.layout.pack(&linear_initial_guess(spec, default_tf_guess(spec))?)?;
    Ok(solve_attempts(&nlp, &base, policy, opts)?.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct CaseRecord {
    pub case: RandomCase,
    pub initial_distance: f64,
    pub attempts: Vec<AttemptResult>,
    /// First attempt that was feasible.
    pub feasible_attempt: Option<usize>,
    #[serde(skip)]
    pub wall_time: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FeasibilityReport {
    pub seed: u64,
    pub n_cases: usize,
    pub max_attempts: usize,
    pub cases: Vec<CaseRecord>,
    /// Cases feasible within the first `i + 1` attempts.
    pub cumulative_feasible: Vec<usize>,
    pub cumulative_rate: Vec<f64>,
}

impl FeasibilityReport {
    /// Report document without wall-clock data; reproducible for a seed.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    pub fn wall_times(&self) -> Vec<f64> {
        self.cases.iter().map(|c| c.wall_time).collect()
    }
}

/// Generates `n_cases` random cases and runs each with recomputation.
/// Case `i` uses stream `i` of `seed` for generation and stream `i` of
/// `seed + 1` for control re-initialisation.
pub fn run_feasibility_study(
    n_cases: usize,
    seed: u64,
    template: &OcpSpec,
    policy: &RecomputePolicy,
    opts: &SolverOptions,
) -> Result<FeasibilityReport, ScenarioError> {
    if n_cases == 0 {
        return Err(ScenarioError::NoCases);
    }
    let cases: Vec<RandomCase> = (0..n_cases as u64)
        .map(|i| generate_random_case(seed, i, template))
        .collect::<Result<_, _>>()?;
    let records: Vec<CaseRecord> = cases
        .into_par_iter()
        .map(|case| {
            let mut spec = template.clone();
            spec.x0 = case.initial;
            spec.wind = case.wind();
            let case_policy = RecomputePolicy {
                attempts: policy.attempts,
                seed: policy.seed ^ case.index.wrapping_mul(0x9E37_79B9_7F4A_7C15),
            };
            let start = Instant::now();
            let attempts = run_with_recomputation(&spec, &case_policy, opts)?;
            let feasible_attempt = attempts.iter().position(|a| a.status.is_feasible());
            Ok(CaseRecord {
                initial_distance: berth_distance(&case.initial, template.berth()),
                case,
                attempts,
                feasible_attempt,
                wall_time: start.elapsed().as_secs_f64(),
            })
        })
        .collect::<Result<_, ScenarioError>>()?;
    let cumulative_feasible: Vec<usize> = (0..policy.attempts)
        .map(|a| records.iter().filter(|r| r.feasible_attempt.is_some_and(|f| f <= a)).count())
        .collect();
    let cumulative_rate = cumulative_feasible.iter().map(|&c| c as f64 / n_cases as f64).collect();
    Ok(FeasibilityReport {
        seed,
        n_cases,
        max_attempts: policy.attempts,
        cases: records,
        cumulative_feasible,
        cumulative_rate,
    })
}
