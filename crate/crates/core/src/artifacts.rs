//! Files written for a planned run.
//!
//! `trajectory.csv` has one row per knot and `substeps.csv` one row per RK4
//! substep. Both share [`TRAJECTORY_HEADER`]. Angles are in degrees, and values
//! are printed to 9 significant digits. At the final knot the command columns
//! repeat the last segment's command.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;

use crate::audit::AuditReport;
use crate::dynamics::{ActuatorState, ControlCommand, State};
use crate::plan::PlanOutcome;
use crate::scenarios::AttemptResult;
use crate::solver::IterationRecord;
use crate::transcription::{actuator_chain, dense_trajectory, RowGroup, Sample, TranscriptionError};

pub const TRAJECTORY_HEADER: [&str; 15] = [
    "t_s",
    "x_m",
    "y_m",
    "psi_deg",
    "u_m_s",
    "v_m_s",
    "r_deg_s",
    "cmd_rudder_port_deg",
    "cmd_rudder_starboard_deg",
    "cmd_propeller_rps",
    "cmd_thruster_rps",
    "rudder_port_deg",
    "rudder_starboard_deg",
    "propeller_rps",
    "thruster_rps",
];

/// Formats to 9 significant digits; scientific outside [1e-4, 1e9).
pub fn fmt9(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.8e}");
    let rounded: f64 = sci.parse().expect("formatted float parses");
    if (1e-4..1e9).contains(&rounded.abs()) {
        return format!("{rounded}");
    }
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
    format!("{mantissa}e{exp}")
}

fn row(t: f64, s: &State, cmd: &ControlCommand, act: &ActuatorState) -> Vec<String> {
    [
        t,
        s.x,
        s.y,
        s.psi.to_degrees(),
        s.u,
        s.v,
        s.r.to_degrees(),
        cmd.rudder_port.to_degrees(),
        cmd.rudder_starboard.to_degrees(),
        cmd.propeller,
        cmd.thruster,
        act.rudder_port.to_degrees(),
        act.rudder_starboard.to_degrees(),
        act.propeller,
        act.thruster,
    ]
    .iter()
    .map(|&v| fmt9(v))
    .collect()
}

fn write_rows<W: Write>(out: W, rows: impl Iterator<Item = Vec<String>>) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAJECTORY_HEADER)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()
}

/// Knot table of a run.
pub fn write_knots<W: Write>(out: W, outcome: &PlanOutcome) -> io::Result<()> {
    let dv = &outcome.trajectory;
    let spec = &outcome.nlp.spec;
    let dt = dv.tf / spec.segments as f64;
    let acts = actuator_chain(spec, dt, &dv.controls);
    let last = *dv.controls.last().expect("at least one segment");
    write_rows(
        out,
        dv.states.iter().enumerate().map(|(k, s)| {
            let cmd = dv.controls.get(k).copied().unwrap_or(last);
            row(k as f64 * dt, s, &cmd, &acts[k])
        }),
    )
}

/// Substep table; interior segment boundaries appear once.
pub fn write_substeps<W: Write>(out: W, segments: &[Vec<Sample>]) -> io::Result<()> {
    let samples = segments
        .iter()
        .enumerate()
        .flat_map(|(k, seg)| seg.iter().skip(usize::from(k > 0)));
    write_rows(out, samples.map(|s| row(s.t, &s.state, &s.command, &s.actuator)))
}

pub fn write_trace<W: Write>(mut out: W, trace: &[IterationRecord]) -> io::Result<()> {
    for rec in trace {
        serde_json::to_writer(&mut out, rec)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata {
    pub name: String,
    pub spec_hash: String,
    pub seed: u64,
    pub wall_time_s: f64,
    pub status: String,
    pub feasible: bool,
    pub tf: f64,
    pub iterations: usize,
    pub max_violation: f64,
    pub objective: f64,
    pub segments: usize,
    pub speed_constraint: bool,
    /// Constraint rows per group; groups absent from the NLP are omitted.
    pub row_groups: BTreeMap<&'static str, usize>,
    pub attempts: Vec<AttemptResult>,
    pub audit: AuditReport,
    pub audit_passed: bool,
    pub message: String,
}

fn group_name(g: RowGroup) -> &'static str {
    match g {
        RowGroup::Defect => "defect",
        RowGroup::Initial => "initial",
        RowGroup::Terminal => "terminal",
        RowGroup::SpeedLower => "speed_lower",
        RowGroup::SpeedUpper => "speed_upper",
        RowGroup::Collision => "collision",
    }
}

impl RunMetadata {
    pub fn new(name: &str, spec_hash: &str, seed: u64, wall_time_s: f64, outcome: &PlanOutcome) -> Self {
        let mut row_groups = BTreeMap::new();
        for r in outcome.nlp.rows() {
            *row_groups.entry(group_name(r.group)).or_insert(0) += 1;
        }
        let res = &outcome.result;
        Self {
            name: name.into(),
            spec_hash: spec_hash.into(),
            seed,
            wall_time_s,
            status: res.status.as_str().into(),
            feasible: res.status.is_feasible(),
            tf: outcome.trajectory.tf,
            iterations: res.iterations,
            max_violation: res.max_violation,
            objective: res.objective,
            segments: outcome.nlp.spec.segments,
            speed_constraint: outcome.nlp.spec.flags.speed_constraint,
            row_groups,
            attempts: outcome.attempts.clone(),
            audit: outcome.audit.clone(),
            audit_passed: outcome.audit_passes(),
            message: res.message.clone(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ArtifactError {
    #[error("writing {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error(transparent)]
    Transcription(#[from] TranscriptionError),
}

fn create(dir: &Path, name: &str) -> Result<io::BufWriter<fs::File>, ArtifactError> {
    let path = dir.join(name);
    fs::File::create(&path)
        .map(io::BufWriter::new)
        .map_err(|source| ArtifactError::Io { path: path.display().to_string(), source })
}

fn io_at(dir: &Path, name: &str) -> impl FnOnce(io::Error) -> ArtifactError {
    let path = dir.join(name).display().to_string();
    move |source| ArtifactError::Io { path, source }
}

/// Writes the full artifact set of one run into `dir`.
pub fn write_run(
    dir: &Path,
    meta: &RunMetadata,
    outcome: &PlanOutcome,
    trace: bool,
) -> Result<(), ArtifactError> {
    fs::create_dir_all(dir).map_err(io_at(dir, ""))?;
    write_knots(create(dir, "trajectory.csv")?, outcome).map_err(io_at(dir, "trajectory.csv"))?;
    let dense = dense_trajectory(&outcome.nlp.spec, &outcome.trajectory)?;
    write_substeps(create(dir, "substeps.csv")?, &dense).map_err(io_at(dir, "substeps.csv"))?;
    if trace {
        write_trace(create(dir, "trace.jsonl")?, &outcome.result.trace).map_err(io_at(dir, "trace.jsonl"))?;
    }
    let json = serde_json::to_string_pretty(meta).expect("metadata serialises");
    fs::write(dir.join("metadata.json"), json + "\n").map_err(io_at(dir, "metadata.json"))?;
    let svg = crate::plot::run_figure(&meta.name, &[crate::plot::Series::from_outcome(outcome, &dense)], &outcome.nlp.spec);
    fs::write(dir.join("plot.svg"), svg).map_err(io_at(dir, "plot.svg"))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt9(1.0), "1");
        assert_eq!(fmt9(-0.0), "0");
        assert_eq!(fmt9(std::f64::consts::PI), "3.14159265");
        assert_eq!(fmt9(123456.789012), "123456.789");
        assert_eq!(fmt9(-2.5e-7), "-2.5e-7");
        assert_eq!(fmt9(0.00012), "0.00012");
        assert_eq!(fmt9(1.234567891e12), "1.23456789e12");
    }

    #[test]
    fn substep_rows_skip_repeated_boundaries() {
        let s = |t| Sample {
            t,
            state: State::default(),
            actuator: ActuatorState::default(),
            command: ControlCommand::default(),
        };
        let segs = vec![vec![s(0.0), s(0.5), s(1.0)], vec![s(1.0), s(1.5), s(2.0)]];
        let mut buf = Vec::new();
        write_substeps(&mut buf, &segs).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert!(text.starts_with("t_s,x_m,"));
    }
}
