//! SQP and QP behaviour on small problems with known solutions.

mod common;

use berthplan::solver::qp::{kkt_error, solve_strict, QpProblem};
use berthplan::solver::{
    kkt_residual, solve, FdScheme, Multipliers, Nlp, SolverOptions, SolverStatus,
};
use common::{brute_force_qp, random_qp, Projection, Rosenbrock};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn equality_projection() {
    let p = Projection { with_gradient: false };
    let r = solve(&p, &[0.0, 0.0], &SolverOptions::default());
    assert_eq!(r.status, SolverStatus::FeasibleOptimal);
    assert!(r.x[0].abs() < 1e-5 && (r.x[1] - 1.0).abs() < 1e-5, "{:?}", r.x);
}

#[test]
fn kkt_residual_at_projection_optimum() {
    // grad f = (-4, -4) = lambda (1, 1) at (0, 1).
    let p = Projection { with_gradient: true };
    let m = Multipliers {
        eq: vec![-4.0],
        ineq: vec![],
    };
    let k = kkt_residual(&p, &[0.0, 1.0], &m).unwrap();
    assert!(k.total() <= 1e-10, "{k:?}");
    let wrong = kkt_residual(&p, &[0.0, 1.0], &Multipliers { eq: vec![0.0], ineq: vec![] }).unwrap();
    assert!((wrong.stationarity - 4.0).abs() < 1e-12);
}

#[test]
fn kkt_violation_term_with_zero_multipliers() {
    let p = Projection { with_gradient: true };
    let zero = Multipliers { eq: vec![0.0], ineq: vec![] };
    let k = kkt_residual(&p, &[0.5, 1.0], &zero).unwrap();
    assert!((k.violation - 0.5).abs() < 1e-15);
}

#[test]
fn constrained_rosenbrock() {
    // Forward differences carry a gradient error of about 1e-5 here because
    // the curvature at the optimum is ~800; central differences remove it.
    let opts = SolverOptions {
        fd_scheme: FdScheme::Central,
        ..SolverOptions::default()
    };
    let r = solve(&Rosenbrock { scale: 1.0 }, &[-1.2, 1.0], &opts);
    assert!(r.status.is_feasible(), "{:?} {}", r.status, r.message);
    assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] - 1.0).abs() < 1e-5, "{:?}", r.x);
}

#[test]
fn objective_scale_does_not_move_argmin() {
    for scale in [1e-2, 1.0, 1e3] {
        let r = solve(&Rosenbrock { scale }, &[-1.2, 1.0], &SolverOptions::default());
        assert!(r.status.is_feasible());
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4, "{scale}: {:?}", r.x);
    }
}

#[test]
fn merit_never_increases() {
    let r = solve(&Rosenbrock { scale: 1.0 }, &[-1.2, 1.0], &SolverOptions::default());
    assert!(!r.trace.is_empty());
    for rec in &r.trace {
        assert!(rec.merit_after <= rec.merit_before, "{rec:?}");
    }
}

#[test]
fn identical_inputs_give_identical_traces() {
    let a = solve(&Rosenbrock { scale: 1.0 }, &[-1.2, 1.0], &SolverOptions::default());
    let b = solve(&Rosenbrock { scale: 1.0 }, &[-1.2, 1.0], &SolverOptions::default());
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.x, b.x);
}

#[test]
fn feasible_results_pass_independent_audit() {
    let p = Rosenbrock { scale: 1.0 };
    let r = solve(&p, &[0.3, -0.4], &SolverOptions::default());
    assert!(r.status.is_feasible());
    let mut ineq = [0.0];
    p.constraints(&r.x, &mut [], &mut ineq).unwrap();
    assert!(ineq[0] >= -1e-6);
}

#[test]
fn qp_matches_active_set_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..100 {
        let qp = random_qp(&mut rng);
        let oracle = brute_force_qp(&qp).expect("generated QPs are feasible");
        let sol = solve_strict(&qp, 1000).unwrap();
        let diff = (&sol.step - &oracle).amax();
        assert!(diff <= 1e-8, "case {case}: diff {diff:e}");
        assert!(kkt_error(&qp, &sol) < 1e-8);
    }
}

#[test]
fn qp_simple_examples() {
    let h = DMatrix::identity(2, 2);
    let g = nalgebra::DVector::from_vec(vec![-1.0, -1.0]);
    let s = solve_strict(&QpProblem::unconstrained(h.clone(), g.clone()), 10).unwrap();
    assert!((s.step[0] - 1.0).abs() < 1e-15 && (s.step[1] - 1.0).abs() < 1e-15);
    let mut qp = QpProblem::unconstrained(h, g);
    qp.a_eq = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
    qp.b_eq = nalgebra::DVector::from_vec(vec![0.0]);
    let s = solve_strict(&qp, 10).unwrap();
    assert!(s.step[0].abs() < 1e-15 && (s.step[1] - 1.0).abs() < 1e-15);
}

