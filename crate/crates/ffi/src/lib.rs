//! C ABI over the planner.
//!
//! Problems and results are opaque handles owned by the caller and released
//! with the matching `_free` function. Every fallible call returns a
//! [`BpStatus`]; on failure [`bp_last_error_message`] describes the cause.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use berthplan::cli::{case_spec, BUNDLED_PORT, BUNDLED_SHIP};
use berthplan::config::{load_scenario, port_from_str, ship_from_str, ConfigError};
use berthplan::constraints::speed_limits;
use berthplan::plan::{plan, PlanOutcome};
use berthplan::scenarios::{RecomputePolicy, ScenarioError};
use berthplan::solver::SolverOptions;
use berthplan::transcription::{OcpSpec, TranscriptionError};

/// Result codes. The values of the first five match the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BpStatus {
    Ok = 0,
    NullPointer = 1,
    Parse = 2,
    SpecInvalid = 3,
    Infeasible = 4,
    Internal = 5,
    OutOfRange = 6,
    InvalidUtf8 = 7,
}

/// Planning problem: transcription spec plus solver settings.
pub struct BpProblem {
    spec: OcpSpec,
    tf_guess: Option<f64>,
    policy: RecomputePolicy,
    solver: SolverOptions,
}

/// Solved trajectory.
pub struct BpResult {
    outcome: PlanOutcome,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn fail(status: BpStatus, msg: impl Into<String>) -> BpStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> BpStatus) -> BpStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(BpStatus::Internal, "panic inside the planner"))
}

fn config_status(e: &ConfigError) -> BpStatus {
    if e.is_parse() {
        BpStatus::Parse
    } else {
        BpStatus::SpecInvalid
    }
}

fn scenario_status(e: &ScenarioError) -> BpStatus {
    match e {
        ScenarioError::Transcription(_) | ScenarioError::TooManyAttempts { .. } | ScenarioError::NoCases => {
            BpStatus::SpecInvalid
        }
        _ => BpStatus::Internal,
    }
}

fn validated(spec: OcpSpec) -> Result<OcpSpec, TranscriptionError> {
    spec.validate().map(|_| spec)
}

fn emit_problem(p: BpProblem, out: *mut *mut BpProblem) -> BpStatus {
    // SAFETY: callers check `out` for null before building the problem.
    unsafe { *out = Box::into_raw(Box::new(p)) };
    BpStatus::Ok
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn bp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a scenario file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bp_problem_from_scenario_file(path: *const c_char, out: *mut *mut BpProblem) -> BpStatus {
    guard(|| {
        if path.is_null() || out.is_null() {
            return fail(BpStatus::NullPointer, "null argument");
        }
        let Ok(path) = CStr::from_ptr(path).to_str() else {
            return fail(BpStatus::InvalidUtf8, "path is not UTF-8");
        };
        let scenario = match load_scenario(Path::new(path), None, None) {
            Ok(s) => s,
            Err(e) => return fail(config_status(&e), e.to_string()),
        };
        let spec = match validated(scenario.spec) {
            Ok(s) => s,
            Err(e) => return fail(BpStatus::SpecInvalid, e.to_string()),
        };
        emit_problem(
            BpProblem {
                spec,
                tf_guess: scenario.file.tf_guess,
                policy: scenario.file.recompute.unwrap_or_default(),
                solver: scenario.file.solver,
            },
            out,
        )
    })
}

/// Reference case `id` (1 to 6) on the bundled ship and port.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bp_problem_from_case(id: u32, speed_constraint: bool, out: *mut *mut BpProblem) -> BpStatus {
    guard(|| {
        if out.is_null() {
            return fail(BpStatus::NullPointer, "null argument");
        }
        let loaded = ship_from_str(Path::new("<bundled ship>"), BUNDLED_SHIP)
            .and_then(|s| Ok((s, port_from_str(Path::new("<bundled port>"), BUNDLED_PORT)?)));
        let ((ship, coeffs), port) = match loaded {
            Ok(v) => v,
            Err(e) => return fail(BpStatus::Internal, e.to_string()),
        };
        let spec = match case_spec(id, speed_constraint, &ship, coeffs, &port) {
            Ok(s) => s,
            Err(e) => return fail(BpStatus::OutOfRange, e.to_string()),
        };
        match validated(spec) {
            Ok(spec) => emit_problem(
                BpProblem { spec, tf_guess: None, policy: RecomputePolicy::default(), solver: SolverOptions::default() },
                out,
            ),
            Err(e) => fail(BpStatus::SpecInvalid, e.to_string()),
        }
    })
}

/// Sets the number of shooting segments (at least 2).
///
/// # Safety
/// `problem` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bp_problem_set_segments(problem: *mut BpProblem, segments: usize) -> BpStatus {
    let Some(p) = problem.as_mut() else {
        return fail(BpStatus::NullPointer, "null problem");
    };
    if segments < 2 {
        return fail(BpStatus::OutOfRange, "segments must be >= 2");
    }
    p.spec.segments = segments;
    BpStatus::Ok
}

/// Enables or disables the speed corridor.
///
/// # Safety
/// `problem` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bp_problem_set_speed_constraint(problem: *mut BpProblem, enabled: bool) -> BpStatus {
    let Some(p) = problem.as_mut() else {
        return fail(BpStatus::NullPointer, "null problem");
    };
    p.spec.flags.speed_constraint = enabled;
    BpStatus::Ok
}

/// Sets the number of solver attempts (1 to 4) and the re-initialisation seed.
///
/// # Safety
/// `problem` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bp_problem_set_attempts(problem: *mut BpProblem, attempts: usize, seed: u64) -> BpStatus {
    let Some(p) = problem.as_mut() else {
        return fail(BpStatus::NullPointer, "null problem");
    };
    if !(1..=berthplan::scenarios::MAX_ATTEMPTS).contains(&attempts) {
        return fail(BpStatus::OutOfRange, "attempts must be in 1..=4");
    }
    p.policy = RecomputePolicy { attempts, seed };
    BpStatus::Ok
}

/// # Safety
/// `problem` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bp_problem_free(problem: *mut BpProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Solves the problem. On `BP_STATUS_OK` and `BP_STATUS_INFEASIBLE` a result
/// handle is stored in `out`; an infeasible result still holds the last
/// iterate.
///
/// # Safety
/// `problem` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bp_plan(problem: *const BpProblem, out: *mut *mut BpResult) -> BpStatus {
    guard(|| {
        let Some(p) = problem.as_ref() else {
            return fail(BpStatus::NullPointer, "null problem");
        };
        if out.is_null() {
            return fail(BpStatus::NullPointer, "null output pointer");
        }
        if let Err(e) = p.spec.validate() {
            return fail(BpStatus::SpecInvalid, e.to_string());
        }
        match plan(&p.spec, p.tf_guess, &p.policy, &p.solver) {
            Ok(outcome) => {
                let status = if outcome.feasible() {
                    BpStatus::Ok
                } else {
                    set_error(format!("solver finished {}: {}", outcome.result.status, outcome.result.message));
                    BpStatus::Infeasible
                };
                *out = Box::into_raw(Box::new(BpResult { outcome }));
                status
            }
            Err(e) => fail(scenario_status(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `result` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bp_result_free(result: *mut BpResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// True when the solver reported a feasible point and the independent audit
/// accepted it.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bp_result_feasible(result: *const BpResult) -> bool {
    result.as_ref().is_some_and(|r| r.outcome.feasible() && r.outcome.audit_passes())
}

/// Final time in seconds, or NaN for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bp_result_final_time(result: *const BpResult) -> f64 {
    result.as_ref().map_or(f64::NAN, |r| r.outcome.trajectory.tf)
}

/// Largest constraint violation reported by the solver, or NaN.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bp_result_max_violation(result: *const BpResult) -> f64 {
    result.as_ref().map_or(f64::NAN, |r| r.outcome.result.max_violation)
}

/// Number of knots (segments + 1), or 0 for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bp_result_knot_count(result: *const BpResult) -> usize {
    result.as_ref().map_or(0, |r| r.outcome.trajectory.states.len())
}

/// Writes knot `k` as (x, y, psi, u, v, r) in SI units and radians.
///
/// # Safety
/// `result` must be a live handle and `state` must point to 6 doubles.
#[no_mangle]
pub unsafe extern "C" fn bp_result_knot(result: *const BpResult, k: usize, state: *mut f64) -> BpStatus {
    let Some(r) = result.as_ref() else {
        return fail(BpStatus::NullPointer, "null result");
    };
    if state.is_null() {
        return fail(BpStatus::NullPointer, "null output buffer");
    }
    let Some(s) = r.outcome.trajectory.states.get(k) else {
        return fail(BpStatus::OutOfRange, format!("knot {k} out of range"));
    };
    ptr::copy_nonoverlapping(s.to_array().as_ptr(), state, 6);
    BpStatus::Ok
}

/// Writes the command of segment `k` as (port rudder, starboard rudder,
/// propeller, thruster) in radians and revolutions per second.
///
/// # Safety
/// `result` must be a live handle and `command` must point to 4 doubles.
#[no_mangle]
pub unsafe extern "C" fn bp_result_command(result: *const BpResult, k: usize, command: *mut f64) -> BpStatus {
    let Some(r) = result.as_ref() else {
        return fail(BpStatus::NullPointer, "null result");
    };
    if command.is_null() {
        return fail(BpStatus::NullPointer, "null output buffer");
    }
    let Some(c) = r.outcome.trajectory.controls.get(k) else {
        return fail(BpStatus::OutOfRange, format!("segment {k} out of range"));
    };
    ptr::copy_nonoverlapping(c.to_array().as_ptr(), command, 4);
    BpStatus::Ok
}

/// Speed corridor of the bundled ship at `distance` metres from the berth.
///
/// # Safety
/// `lower` and `upper` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn bp_speed_limits(distance: f64, lower: *mut f64, upper: *mut f64) -> BpStatus {
    if lower.is_null() || upper.is_null() {
        return fail(BpStatus::NullPointer, "null output pointer");
    }
    if !(distance >= 0.0 && distance.is_finite()) {
        return fail(BpStatus::OutOfRange, "distance must be finite and >= 0");
    }
    match ship_from_str(Path::new("<bundled ship>"), BUNDLED_SHIP) {
        Ok((ship, coeffs)) => {
            let (lo, hi) = speed_limits(distance, &ship, &coeffs);
            *lower = lo;
            *upper = hi;
            BpStatus::Ok
        }
        Err(e) => fail(BpStatus::Internal, e.to_string()),
    }
}
