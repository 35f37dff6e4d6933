//! Case table, random case generator and the recomputation procedure.

mod common;

use std::f64::consts::PI;

use berthplan::dynamics::State;
use berthplan::scenarios::{
    attempt_guess, case_config, case_rng, draw_multipliers, generate_random_case, run_feasibility_study,
    RecomputePolicy, ScenarioError,
};
use berthplan::solver::SolverOptions;
use berthplan::transcription::{build_nlp, default_tf_guess, linear_initial_guess};
use common::{bundled_spec, corridor, crossing_inside, domain_outline};

fn template() -> berthplan::transcription::OcpSpec {
    bundled_spec(State::new(0.0, 0.0, PI, 0.0, 0.0, 0.0), 30)
}

#[test]
#[allow(clippy::approx_constant)]
fn case_table_rows() {
    // (x0, y0, psi, u, wind direction, wind speed)
    let rows = [
        (60.0, 0.0, 3.14, 0.74, 0.0, 1.0),
        (55.2, -6.0, 2.36, 0.58, 45.0, 0.75),
        (57.6, 10.0, 3.93, 0.58, 250.0, 0.5),
        (52.8, -10.0, 1.57, 0.47, 45.0, 0.25),
        (24.0, 6.0, 3.77, 0.34, 90.0, 0.5),
        (28.8, 0.0, 3.14, 0.29, 315.0, 0.75),
    ];
    for (i, r) in rows.iter().enumerate() {
        let c = case_config(i as u32 + 1).unwrap();
        assert_eq!(c.initial, State::new(r.0, r.1, r.2, r.3, 0.0, 0.0));
        assert_eq!((c.wind_direction_deg, c.wind_speed), (r.4, r.5));
    }
    assert!(matches!(case_config(0), Err(ScenarioError::UnknownCase(0))));
    assert!(matches!(case_config(7), Err(ScenarioError::UnknownCase(7))));
}

#[test]
fn multiplier_ranges_and_every_heading_branch() {
    let mut rng = case_rng(1, 0);
    let mut seen = [0usize; 4];
    for _ in 0..10_000 {
        let (v, branch) = draw_multipliers(&mut rng);
        assert!((0.2..=3.0).contains(&v[0]) && (0.2..=2.54).contains(&v[1]));
        assert!((-6.0..=4.0).contains(&v[2]) && (0.1..=1.0).contains(&v[3]) && (0.1..=1.0).contains(&v[5]));
        let range = match (v[0] <= 1.0, v[2] >= 0.0) {
            (true, true) => (1, 0.5, 0.85),
            (true, false) if v[0] < 1.0 => (2, 1.35, 1.50),
            (false, false) => (3, 1.0, 1.5),
            _ => (4, 0.5, 1.0),
        };
        assert_eq!(branch, range.0);
        assert!((range.1..=range.2).contains(&v[4]), "{v:?}");
        seen[branch as usize - 1] += 1;
    }
    assert!(seen.iter().all(|&n| n > 100), "{seen:?}");
}

/// Asymptotic Kolmogorov distribution tail with the Stephens correction.
fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    let p: f64 = (1..=100)
        .map(|k| {
            let k = k as f64;
            2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp()
        })
        .sum();
    p.clamp(0.0, 1.0)
}

#[test]
fn surge_multiplier_is_uniform() {
    let mut rng = case_rng(2024, 3);
    let n = 10_000;
    let mut v2: Vec<f64> = (0..n).map(|_| draw_multipliers(&mut rng).0[1]).collect();
    v2.sort_by(f64::total_cmp);
    let cdf = |x: f64| (x - 0.2) / (2.54 - 0.2);
    let d = v2
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n as f64).max((i + 1) as f64 / n as f64 - f)
        })
        .fold(0.0, f64::max);
    let p = ks_p_value(d, n);
    assert!(p > 0.01, "D = {d}, p = {p}");
}

#[test]
fn generated_cases_pass_an_independent_recheck() {
    let t = template();
    let verts = t.port.vertices().to_vec();
    for i in 0..200 {
        let c = generate_random_case(77, i, &t).unwrap();
        let outline = domain_outline(&c.initial, &t.ship, t.domain_vertices);
        assert!(outline.iter().all(|&q| crossing_inside(q, &verts)), "case {i}");
        let d = c.initial.x.hypot(c.initial.y);
        let (lo, hi) = corridor(d, &t.ship, &t.coeffs);
        assert!(lo <= c.initial.u && c.initial.u <= hi, "case {i}");
        assert!((0.0..=360.0).contains(&c.wind_direction_deg) && (0.0..=1.0).contains(&c.wind_speed));
        assert_eq!(c, generate_random_case(77, i, &t).unwrap());
    }
}

#[test]
fn recomputation_only_changes_commands() {
    let t = template();
    let mut spec = t.clone();
    spec.x0 = case_config(5).unwrap().initial;
    let nlp = build_nlp(&spec).unwrap();
    let base = nlp.layout.pack(&linear_initial_guess(&spec, default_tf_guess(&spec)).unwrap()).unwrap();
    let policy = RecomputePolicy { attempts: 4, seed: 9 };
    assert_eq!(attempt_guess(&nlp, &base, &policy, 0), base);
    let start = nlp.layout.control_offset();
    for attempt in 1..4 {
        let g = attempt_guess(&nlp, &base, &policy, attempt);
        assert_eq!(g[..start], base[..start]);
        assert_ne!(g[start..], base[start..]);
        assert_eq!(g, attempt_guess(&nlp, &base, &policy, attempt));
    }
}

#[test]
fn single_case_study_and_determinism() {
    let t = template();
    let opts = SolverOptions::default();
    let policy = RecomputePolicy { attempts: 2, seed: 4 };
    let a = run_feasibility_study(1, 5, &t, &policy, &opts).unwrap();
    assert_eq!(a.cases.len(), 1);
    assert_eq!(a.cumulative_feasible.len(), 2);
    assert!(a.cumulative_feasible[0] <= a.cumulative_feasible[1]);
    let b = run_feasibility_study(1, 5, &t, &policy, &opts).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    assert!(matches!(run_feasibility_study(0, 5, &t, &policy, &opts), Err(ScenarioError::NoCases)));
}
