//! Command-line verbs: `plan`, `cases`, `feasibility` and `validate`.
//!
//! Exit codes: 0 success, 2 parse error, 3 invalid specification,
//! 4 infeasible result, 5 internal error.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::artifacts::{fmt9, write_run, ArtifactError, RunMetadata};
use crate::config::{
    load_port, load_scenario, load_ship, load_study, port_from_str, ship_from_str, spec_hash, validate_file,
    ConfigError, Port, ProblemOptions,
};
use crate::constraints::SpeedLimitCoefficients;
use crate::dynamics::ShipParams;
use crate::plan::{plan, PlanOutcome};
use crate::plot;
use crate::scenarios::{case_config, run_feasibility_study, RecomputePolicy, ScenarioError};
use crate::solver::SolverOptions;
use crate::transcription::{dense_trajectory, CollisionMode, OcpSpec, TranscriptionError};

pub const BUNDLED_SHIP: &str = include_str!("../data/ship.toml");
pub const BUNDLED_PORT: &str = include_str!("../data/port.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Parse = 2,
    Spec = 3,
    Infeasible = 4,
    Internal = 5,
}

impl From<Exit> for std::process::ExitCode {
    fn from(e: Exit) -> Self {
        std::process::ExitCode::from(e as u8)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub exit: Exit,
    pub message: String,
}

impl CliError {
    fn new(exit: Exit, message: impl Into<String>) -> Self {
        Self { exit, message: message.into() }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        let exit = if e.is_parse() { Exit::Parse } else { Exit::Spec };
        Self::new(exit, e.to_string())
    }
}

impl From<TranscriptionError> for CliError {
    fn from(e: TranscriptionError) -> Self {
        Self::new(Exit::Spec, e.to_string())
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        let exit = match e {
            ScenarioError::Transcription(_) | ScenarioError::TooManyAttempts { .. } | ScenarioError::NoCases => Exit::Spec,
            _ => Exit::Internal,
        };
        Self::new(exit, e.to_string())
    }
}

impl From<ArtifactError> for CliError {
    fn from(e: ArtifactError) -> Self {
        Self::new(Exit::Internal, e.to_string())
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::new(Exit::Internal, format!("writing {}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "berthplan", version, about = "Plan berthing trajectories for a twin-rudder ship")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Plan one scenario file.
    Plan(PlanArgs),
    /// Run the six reference cases with and without the speed corridor.
    Cases(CasesArgs),
    /// Run a randomised feasibility study.
    Feasibility(FeasibilityArgs),
    /// Check ship, port, scenario and study files.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Ship file replacing the one referenced by the input.
    #[arg(long)]
    pub ship: Option<PathBuf>,
    /// Port file replacing the one referenced by the input.
    #[arg(long)]
    pub port: Option<PathBuf>,
    /// Number of shooting segments.
    #[arg(long)]
    pub segments: Option<usize>,
    /// Seed for control re-initialisation (and case generation in studies).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Collision constraint: `smooth` or `winding`.
    #[arg(long, value_parser = parse_collision_mode)]
    pub collision_mode: Option<CollisionMode>,
    /// Write the per-iteration solver trace.
    #[arg(long)]
    pub trace: bool,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

fn parse_collision_mode(s: &str) -> Result<CollisionMode, String> {
    match s {
        "winding" => Ok(CollisionMode::Winding),
        "smooth" => Ok(CollisionMode::Smooth),
        _ => Err(format!("expected `winding` or `smooth`, got `{s}`")),
    }
}

#[derive(Debug, Clone, Args)]
pub struct PlanArgs {
    /// Scenario TOML file.
    pub scenario: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
    /// Drop the speed corridor rows.
    #[arg(long)]
    pub no_speed_constraint: bool,
}

#[derive(Debug, Clone, Args)]
pub struct CasesArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct FeasibilityArgs {
    /// Study TOML file.
    pub study: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
    /// Drop the speed corridor rows.
    #[arg(long)]
    pub no_speed_constraint: bool,
    /// Overrides the number of cases in the study file.
    #[arg(long)]
    pub cases: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    /// Files to check; the kind is inferred from the contents.
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
}

fn apply_overrides(spec: &mut OcpSpec, common: &CommonArgs, no_speed_constraint: bool) {
    if let Some(n) = common.segments {
        spec.segments = n;
    }
    if let Some(m) = common.collision_mode {
        spec.flags.collision_mode = m;
    }
    if no_speed_constraint {
        spec.flags.speed_constraint = false;
    }
}

/// Runs a verb and maps the outcome to an exit code, printing diagnostics.
pub fn execute(cli: Cli) -> Exit {
    let result = match cli.command {
        Command::Plan(a) => cmd_plan(&a),
        Command::Cases(a) => cmd_cases(&a),
        Command::Feasibility(a) => cmd_feasibility(&a),
        Command::Validate(a) => cmd_validate(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.exit
        }
    }
}

fn summary_line(name: &str, o: &PlanOutcome) -> String {
    format!(
        "{name:<16} {:<17} tf {:>8.2} s  iterations {:>4}  violation {:.2e}  audit {}",
        o.result.status.as_str(),
        o.trajectory.tf,
        o.result.iterations,
        o.result.max_violation,
        if o.audit_passes() { "pass" } else { "fail" }
    )
}

fn finish_run(o: &PlanOutcome) -> Exit {
    match (o.feasible(), o.audit_passes()) {
        (true, true) => Exit::Ok,
        (true, false) => Exit::Internal,
        (false, _) => Exit::Infeasible,
    }
}

pub fn cmd_plan(args: &PlanArgs) -> Result<Exit, CliError> {
    let c = &args.common;
    let scenario = load_scenario(&args.scenario, c.ship.as_deref(), c.port.as_deref())?;
    let mut spec = scenario.spec.clone();
    apply_overrides(&mut spec, c, args.no_speed_constraint);
    spec.validate()?;
    let mut policy = scenario.file.recompute.unwrap_or_default();
    if let Some(s) = c.seed {
        policy.seed = s;
    }
    let start = Instant::now();
    let outcome = plan(&spec, scenario.file.tf_guess, &policy, &scenario.file.solver)?;
    let meta = RunMetadata::new(&scenario.name, &spec_hash(&spec), policy.seed, start.elapsed().as_secs_f64(), &outcome);
    write_run(&c.out, &meta, &outcome, c.trace)?;
    println!("{}", summary_line(&scenario.name, &outcome));
    if outcome.feasible() && !outcome.audit_passes() {
        eprintln!("error: audit rejected the returned trajectory: {:?}", outcome.audit);
    }
    Ok(finish_run(&outcome))
}

fn bundled_or(path: Option<&Path>) -> Result<(ShipParams, SpeedLimitCoefficients), ConfigError> {
    match path {
        Some(p) => load_ship(p),
        None => ship_from_str(Path::new("<bundled ship.toml>"), BUNDLED_SHIP),
    }
}

fn bundled_port_or(path: Option<&Path>) -> Result<Port, ConfigError> {
    match path {
        Some(p) => load_port(p),
        None => port_from_str(Path::new("<bundled port.toml>"), BUNDLED_PORT),
    }
}

/// Spec of reference case `id`, built from the given ship and port.
pub fn case_spec(
    id: u32,
    speed_constraint: bool,
    ship: &ShipParams,
    coeffs: SpeedLimitCoefficients,
    port: &Port,
) -> Result<OcpSpec, ScenarioError> {
    let c = case_config(id)?;
    let options = ProblemOptions { speed_constraint, ..ProblemOptions::default() };
    Ok(options.spec(c.initial, c.wind(), ship.clone(), coeffs, port))
}

pub fn cmd_cases(args: &CasesArgs) -> Result<Exit, CliError> {
    let c = &args.common;
    let (ship, coeffs) = bundled_or(c.ship.as_deref())?;
    let port = bundled_port_or(c.port.as_deref())?;
    let mut jobs = Vec::new();
    for id in 1..=6u32 {
        for constrained in [true, false] {
            let mut spec = case_spec(id, constrained, &ship, coeffs, &port)?;
            apply_overrides(&mut spec, c, false);
            spec.validate()?;
            jobs.push((id, constrained, spec));
        }
    }
    let policy = RecomputePolicy { seed: c.seed.unwrap_or(0), ..RecomputePolicy::default() };
    let opts = SolverOptions::default();
    let runs: Vec<_> = jobs
        .into_par_iter()
        .map(|(id, constrained, spec)| {
            let name = format!("case{id}-{}", if constrained { "speed" } else { "nospeed" });
            let dir = c.out.join(format!("case{id}")).join(if constrained { "speed" } else { "nospeed" });
            let start = Instant::now();
            let res = plan(&spec, None, &policy, &opts).map_err(CliError::from).and_then(|o| {
                let meta = RunMetadata::new(&name, &spec_hash(&spec), policy.seed, start.elapsed().as_secs_f64(), &o);
                write_run(&dir, &meta, &o, c.trace)?;
                Ok(o)
            });
            (id, constrained, name, res)
        })
        .collect();

    let mut summary = String::from("case,speed_constraint,status,tf_s,iterations,max_violation,audit\n");
    let mut exit = Exit::Ok;
    for (id, constrained, name, res) in &runs {
        match res {
            Ok(o) => {
                println!("{}", summary_line(name, o));
                let _ = writeln!(
                    summary,
                    "{id},{constrained},{},{},{},{},{}",
                    o.result.status.as_str(),
                    fmt9(o.trajectory.tf),
                    o.result.iterations,
                    fmt9(o.result.max_violation),
                    if o.audit_passes() { "pass" } else { "fail" }
                );
                let code = finish_run(o);
                if code != Exit::Ok && exit == Exit::Ok {
                    exit = code;
                }
            }
            Err(e) => {
                println!("{name:<16} error: {}", e.message);
                let _ = writeln!(summary, "{id},{constrained},error,,,,");
                if exit == Exit::Ok {
                    exit = e.exit;
                }
            }
        }
    }
    for id in 1..=6u32 {
        let pair: Vec<&PlanOutcome> = runs
            .iter()
            .filter(|r| r.0 == id)
            .filter_map(|r| r.3.as_ref().ok())
            .collect();
        if pair.is_empty() {
            continue;
        }
        let series = pair
            .iter()
            .map(|o| Ok(plot::Series::from_outcome(o, &dense_trajectory(&o.nlp.spec, &o.trajectory)?)))
            .collect::<Result<Vec<_>, TranscriptionError>>()?;
        // Both runs share the port and the corridor; either spec will do.
        let svg = plot::run_figure(&format!("Case {id}"), &series, &pair[0].nlp.spec);
        let path = c.out.join(format!("case{id}")).join("comparison.svg");
        fs::write(&path, svg).map_err(|e| io_error(&path, e))?;
    }
    let path = c.out.join("summary.csv");
    fs::write(&path, summary).map_err(|e| io_error(&path, e))?;
    Ok(exit)
}

pub fn cmd_feasibility(args: &FeasibilityArgs) -> Result<Exit, CliError> {
    let c = &args.common;
    let mut study = load_study(&args.study, c.ship.as_deref(), c.port.as_deref())?;
    if let Some(s) = c.seed {
        study.file.seed = s;
    }
    if let Some(n) = args.cases {
        study.file.n_cases = n;
    }
    apply_overrides(&mut study.template, c, args.no_speed_constraint);
    study.template.validate()?;
    let start = Instant::now();
    let report = run_feasibility_study(
        study.file.n_cases,
        study.file.seed,
        &study.template,
        &study.file.policy(),
        &study.file.solver,
    )?;
    let elapsed = start.elapsed().as_secs_f64();
    fs::create_dir_all(&c.out).map_err(|e| io_error(&c.out, e))?;

    let mut cases = String::from(
        "case,draws,branch,x_m,y_m,psi_deg,u_m_s,v_m_s,r_deg_s,wind_direction_deg,wind_speed_m_s,initial_distance_m,attempts,feasible_attempt,status,tf_s\n",
    );
    let mut timing = String::from("case,initial_distance_m,wall_time_s,feasible\n");
    for rec in &report.cases {
        let s = rec.case.initial;
        let last = rec.attempts.last().expect("at least one attempt");
        let cols: Vec<String> = [s.x, s.y, s.psi.to_degrees(), s.u, s.v, s.r.to_degrees(), rec.case.wind_direction_deg, rec.case.wind_speed, rec.initial_distance]
            .iter()
            .map(|&v| fmt9(v))
            .collect();
        let _ = writeln!(
            cases,
            "{},{},{},{},{},{},{},{}",
            rec.case.index,
            rec.case.draws,
            rec.case.branch,
            cols.join(","),
            rec.attempts.len(),
            rec.feasible_attempt.map(|a| (a + 1).to_string()).unwrap_or_default(),
            last.status.as_str(),
            fmt9(last.tf)
        );
        let _ = writeln!(
            timing,
            "{},{},{},{}",
            rec.case.index,
            fmt9(rec.initial_distance),
            fmt9(rec.wall_time),
            rec.feasible_attempt.is_some()
        );
    }
    let points: Vec<(f64, f64, bool)> = report
        .cases
        .iter()
        .map(|r| (r.initial_distance, r.wall_time, r.feasible_attempt.is_some()))
        .collect();
    for (name, body) in [
        ("report.json", report.to_json() + "\n"),
        ("cases.csv", cases),
        ("timing.csv", timing),
        ("feasibility.svg", plot::feasibility_bars(&report.cumulative_rate)),
        ("timing.svg", plot::time_vs_distance(&points)),
    ] {
        let path = c.out.join(name);
        fs::write(&path, body).map_err(|e| io_error(&path, e))?;
    }
    println!("{} cases, seed {}, {:.1} s", report.n_cases, report.seed, elapsed);
    for (i, (n, r)) in report.cumulative_feasible.iter().zip(&report.cumulative_rate).enumerate() {
        println!("attempt {}: {n}/{} feasible ({:.1}%)", i + 1, report.n_cases, 100.0 * r);
    }
    Ok(Exit::Ok)
}

pub fn cmd_validate(args: &ValidateArgs) -> Result<Exit, CliError> {
    let mut exit = Exit::Ok;
    for f in &args.files {
        match validate_file(f) {
            Ok(kind) => println!("ok      {} ({kind:?})", f.display()),
            Err(e) => {
                println!("invalid {e}");
                let code = CliError::from(e).exit;
                if exit == Exit::Ok || code == Exit::Parse {
                    exit = code;
                }
            }
        }
    }
    Ok(exit)
}
