//! TOML files for ships, ports, scenarios and studies. Angles are degrees
//! in files and radians in memory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::SpeedLimitCoefficients;
use crate::dynamics::{
    ActuatorLimits, DomainParams, HullCoefficients, Particulars, PropellerCoefficients, RudderCoefficients,
    ShipParams, State, ThrusterCoefficients, WindCoefficients, WindCondition,
};
use crate::geometry::{Point, Polygon};
use crate::scenarios::{case_config, RecomputePolicy, ScenarioError};
use crate::solver::SolverOptions;
use crate::transcription::{CollisionMode, ObjectiveMode, OcpFlags, OcpSpec};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: {}", .violations.join("; "))]
    Invalid { path: PathBuf, violations: Vec<String> },
}

impl ConfigError {
    pub fn is_parse(&self) -> bool {
        matches!(self, ConfigError::Io { .. } | ConfigError::Parse { .. })
    }
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T, ConfigError> {
    toml::from_str(text).map_err(|e| ConfigError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn invalid(path: &Path, violations: Vec<String>) -> ConfigError {
    ConfigError::Invalid {
        path: path.to_path_buf(),
        violations,
    }
}

/// Actuator section with angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActuatorFile {
    pub rudder_outboard_deg: f64,
    pub rudder_inboard_deg: f64,
    pub propeller_max: f64,
    pub thruster_max: f64,
    pub rudder_rate_deg_s: f64,
    pub propeller_rate: f64,
    pub thruster_rate: f64,
    pub rudder_scale: f64,
    pub propeller_scale: f64,
    pub thruster_scale: f64,
    pub vectwin: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_propeller: Option<f64>,
}

impl From<&ActuatorLimits> for ActuatorFile {
    fn from(a: &ActuatorLimits) -> Self {
        Self {
            rudder_outboard_deg: a.rudder_outboard.to_degrees(),
            rudder_inboard_deg: a.rudder_inboard.to_degrees(),
            propeller_max: a.propeller_max,
            thruster_max: a.thruster_max,
            rudder_rate_deg_s: a.rudder_rate.to_degrees(),
            propeller_rate: a.propeller_rate,
            thruster_rate: a.thruster_rate,
            rudder_scale: a.rudder_scale,
            propeller_scale: a.propeller_scale,
            thruster_scale: a.thruster_scale,
            vectwin: a.vectwin,
            fixed_propeller: a.fixed_propeller,
        }
    }
}

impl From<&ActuatorFile> for ActuatorLimits {
    fn from(a: &ActuatorFile) -> Self {
        Self {
            rudder_outboard: a.rudder_outboard_deg.to_radians(),
            rudder_inboard: a.rudder_inboard_deg.to_radians(),
            propeller_max: a.propeller_max,
            thruster_max: a.thruster_max,
            rudder_rate: a.rudder_rate_deg_s.to_radians(),
            propeller_rate: a.propeller_rate,
            thruster_rate: a.thruster_rate,
            rudder_scale: a.rudder_scale,
            propeller_scale: a.propeller_scale,
            thruster_scale: a.thruster_scale,
            vectwin: a.vectwin,
            fixed_propeller: a.fixed_propeller,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShipFile {
    pub particulars: Particulars,
    pub hull: HullCoefficients,
    pub propeller: PropellerCoefficients,
    pub rudder: RudderCoefficients,
    pub thruster: ThrusterCoefficients,
    pub wind: WindCoefficients,
    pub actuators: ActuatorFile,
    pub domain: DomainParams,
    #[serde(default)]
    pub speed_limits: Option<SpeedLimitCoefficients>,
}

impl ShipFile {
    pub fn from_params(p: &ShipParams) -> Self {
        Self {
            particulars: p.particulars,
            hull: p.hull,
            propeller: p.propeller,
            rudder: p.rudder,
            thruster: p.thruster,
            wind: p.wind,
            actuators: (&p.actuators).into(),
            domain: p.domain,
            speed_limits: None,
        }
    }

    pub fn params(&self) -> ShipParams {
        ShipParams {
            particulars: self.particulars,
            hull: self.hull,
            propeller: self.propeller,
            rudder: self.rudder,
            thruster: self.thruster,
            wind: self.wind,
            actuators: (&self.actuators).into(),
            domain: self.domain,
        }
    }

    pub fn coefficients(&self) -> SpeedLimitCoefficients {
        self.speed_limits.unwrap_or_default()
    }

    /// All invariant violations as `field: invariant` strings.
    pub fn violations(&self) -> Vec<String> {
        let mut out: Vec<String> = match self.params().validate() {
            Ok(()) => Vec::new(),
            Err(v) => v.iter().map(ToString::to_string).collect(),
        };
        out.extend(
            self.coefficients()
                .violations()
                .into_iter()
                .map(|v| format!("speed_limits: invariant `{v}` violated")),
        );
        out
    }
}

pub fn load_ship(path: &Path) -> Result<(ShipParams, SpeedLimitCoefficients), ConfigError> {
    ship_from_str(path, &read(path)?)
}

/// Parses ship text; `path` only labels diagnostics.
pub fn ship_from_str(path: &Path, text: &str) -> Result<(ShipParams, SpeedLimitCoefficients), ConfigError> {
    let file: ShipFile = parse(path, text)?;
    let v = file.violations();
    if !v.is_empty() {
        return Err(invalid(path, v));
    }
    Ok((file.params(), file.coefficients()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BerthFile {
    pub x: f64,
    pub y: f64,
    pub heading_deg: f64,
}

impl BerthFile {
    pub fn state(&self) -> State {
        State::new(self.x, self.y, self.heading_deg.to_radians(), 0.0, 0.0, 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortFile {
    #[serde(default)]
    pub name: String,
    /// Closed boundary: the last point repeats the first.
    pub boundary: Vec<Point>,
    pub berth: BerthFile,
}

#[derive(Debug, Clone)]
pub struct Port {
    pub name: String,
    pub polygon: Polygon,
    pub berth: State,
}

impl PortFile {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Err(e) = Polygon::new(self.boundary.clone()) {
            out.push(format!("boundary: {e}"));
        }
        if !(self.berth.x.is_finite() && self.berth.y.is_finite() && self.berth.heading_deg.is_finite()) {
            out.push("berth: values must be finite".into());
        }
        out
    }
}

pub fn load_port(path: &Path) -> Result<Port, ConfigError> {
    port_from_str(path, &read(path)?)
}

pub fn port_from_str(path: &Path, text: &str) -> Result<Port, ConfigError> {
    let file: PortFile = parse(path, text)?;
    let polygon = Polygon::new(file.boundary.clone()).map_err(|e| invalid(path, vec![format!("boundary: {e}")]))?;
    let v = file.violations();
    if !v.is_empty() {
        return Err(invalid(path, v));
    }
    Ok(Port {
        name: file.name,
        polygon,
        berth: file.berth.state(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialFile {
    pub x: f64,
    pub y: f64,
    pub heading_deg: f64,
    pub u: f64,
    #[serde(default)]
    pub v: f64,
    #[serde(default)]
    pub r_deg_s: f64,
}

impl InitialFile {
    pub fn state(&self) -> State {
        State::new(
            self.x,
            self.y,
            self.heading_deg.to_radians(),
            self.u,
            self.v,
            self.r_deg_s.to_radians(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindFile {
    pub direction_deg: f64,
    pub speed: f64,
}

/// Numerical and constraint options shared by scenario and study files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemOptions {
    pub segments: usize,
    pub speed_constraint: bool,
    pub collision: bool,
    pub collision_mode: CollisionMode,
    pub objective: ObjectiveMode,
    pub tf_min: f64,
    pub tf_max: f64,
    pub substeps: usize,
    pub domain_vertices: usize,
    pub softmin_sharpness: f64,
}

impl Default for ProblemOptions {
    fn default() -> Self {
        let f = OcpFlags::default();
        Self {
            segments: 30,
            speed_constraint: f.speed_constraint,
            collision: f.collision,
            collision_mode: f.collision_mode,
            objective: f.objective,
            tf_min: 1.0,
            tf_max: 600.0,
            substeps: 4,
            domain_vertices: crate::geometry::DEFAULT_DOMAIN_VERTICES,
            softmin_sharpness: 20.0,
        }
    }
}

impl ProblemOptions {
    /// OCP from the options and the loaded pieces.
    pub fn spec(
        &self,
        x0: State,
        wind: WindCondition,
        ship: ShipParams,
        coeffs: SpeedLimitCoefficients,
        port: &Port,
    ) -> OcpSpec {
        let mut spec = OcpSpec::new(x0, port.berth, self.segments, wind, ship, port.polygon.clone());
        spec.coeffs = coeffs;
        spec.flags = OcpFlags {
            speed_constraint: self.speed_constraint,
            collision: self.collision,
            collision_mode: self.collision_mode,
            objective: self.objective,
        };
        spec.tf_bounds = (self.tf_min, self.tf_max);
        spec.substeps = self.substeps;
        spec.domain_vertices = self.domain_vertices;
        spec.softmin_sharpness = self.softmin_sharpness;
        spec
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: Option<String>,
    /// Ship file, relative to the scenario file.
    pub ship: PathBuf,
    pub port: PathBuf,
    /// Takes initial state and wind from the case table.
    #[serde(default)]
    pub case: Option<u32>,
    #[serde(default)]
    pub initial: Option<InitialFile>,
    #[serde(default)]
    pub wind: Option<WindFile>,
    #[serde(default)]
    pub tf_guess: Option<f64>,
    #[serde(default)]
    pub options: ProblemOptions,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub recompute: Option<RecomputePolicy>,
}

impl ScenarioFile {
    pub fn initial_and_wind(&self) -> Result<(State, WindCondition), String> {
        let case = match self.case {
            Some(id) => Some(case_config(id).map_err(|e: ScenarioError| format!("case: {e}"))?),
            None => None,
        };
        let x0 = match (&self.initial, &case) {
            (Some(i), _) => i.state(),
            (None, Some(c)) => c.initial,
            (None, None) => return Err("initial: required when `case` is absent".into()),
        };
        let wind = match (&self.wind, &case) {
            (Some(w), _) => WindCondition::from_degrees(w.speed, w.direction_deg),
            (None, Some(c)) => c.wind(),
            (None, None) => WindCondition::calm(),
        };
        Ok((x0, wind))
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Err(e) = self.initial_and_wind() {
            out.push(e);
        }
        if let Some(w) = &self.wind {
            if w.speed < 0.0 {
                out.push("wind.speed: invariant `U_T >= 0` violated".into());
            }
        }
        if let Some(t) = self.tf_guess {
            if !(t > 0.0) {
                out.push("tf_guess: invariant `tf_guess > 0` violated".into());
            }
        }
        if let Err(e) = self.solver.validate() {
            out.push(format!("solver: {e}"));
        }
        out
    }
}

/// Fully loaded scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub file: ScenarioFile,
    pub spec: OcpSpec,
    /// Hash of the resolved problem inputs.
    pub spec_hash: String,
}

pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.parent().unwrap_or(Path::new(".")).join(p)
    }
}

pub fn parse_scenario(path: &Path) -> Result<ScenarioFile, ConfigError> {
    parse(path, &read(path)?)
}

/// Loads a scenario with optional overrides of the ship and port files.
pub fn load_scenario(path: &Path, ship: Option<&Path>, port: Option<&Path>) -> Result<Scenario, ConfigError> {
    let file = parse_scenario(path)?;
    let ship_path = ship.map_or_else(|| resolve(path, &file.ship), Path::to_path_buf);
    let port_path = port.map_or_else(|| resolve(path, &file.port), Path::to_path_buf);
    let (params, coeffs) = load_ship(&ship_path)?;
    let port = load_port(&port_path)?;
    let v = file.violations();
    if !v.is_empty() {
        return Err(invalid(path, v));
    }
    let (x0, wind) = file.initial_and_wind().map_err(|e| invalid(path, vec![e]))?;
    let spec = file.options.spec(x0, wind, params, coeffs, &port);
    let name = file.name.clone().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scenario".into())
    });
    let spec_hash = spec_hash(&spec);
    Ok(Scenario { name, file, spec, spec_hash })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyFile {
    pub ship: PathBuf,
    pub port: PathBuf,
    pub n_cases: usize,
    pub seed: u64,
    /// Recomputations after the first attempt, at most 3.
    #[serde(default = "default_recomputations")]
    pub recomputations: usize,
    #[serde(default)]
    pub options: ProblemOptions,
    #[serde(default)]
    pub solver: SolverOptions,
}

fn default_recomputations() -> usize {
    3
}

impl StudyFile {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.n_cases == 0 {
            out.push("n_cases: invariant `n_cases >= 1` violated".into());
        }
        if self.recomputations > 3 {
            out.push("recomputations: invariant `recomputations <= 3` violated".into());
        }
        if let Err(e) = self.solver.validate() {
            out.push(format!("solver: {e}"));
        }
        out
    }

    pub fn policy(&self) -> RecomputePolicy {
        RecomputePolicy {
            attempts: self.recomputations + 1,
            seed: self.seed.wrapping_add(1),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Study {
    pub file: StudyFile,
    /// OCP template; x0 and wind are replaced per case.
    pub template: OcpSpec,
}

pub fn parse_study(path: &Path) -> Result<StudyFile, ConfigError> {
    parse(path, &read(path)?)
}

pub fn load_study(path: &Path, ship: Option<&Path>, port: Option<&Path>) -> Result<Study, ConfigError> {
    let file = parse_study(path)?;
    let (params, coeffs) = load_ship(&ship.map_or_else(|| resolve(path, &file.ship), Path::to_path_buf))?;
    let port = load_port(&port.map_or_else(|| resolve(path, &file.port), Path::to_path_buf))?;
    let v = file.violations();
    if !v.is_empty() {
        return Err(invalid(path, v));
    }
    let template = file.options.spec(port.berth, WindCondition::calm(), params, coeffs, &port);
    Ok(Study { file, template })
}

/// SHA-256 over a canonical text rendering of the problem inputs.
pub fn spec_hash(spec: &OcpSpec) -> String {
    use sha2::{Digest, Sha256};
    let canonical = serde_json::json!({
        "x0": spec.x0,
        "xf": spec.xf,
        "segments": spec.segments,
        "wind": [spec.wind.speed(), spec.wind.direction()],
        "ship": ShipFile::from_params(&spec.ship),
        "port": spec.port.vertices(),
        "coeffs": spec.coeffs,
        "flags": spec.flags,
        "tf_bounds": [spec.tf_bounds.0, spec.tf_bounds.1],
        "substeps": spec.substeps,
        "domain_vertices": spec.domain_vertices,
        "softmin_sharpness": spec.softmin_sharpness,
        "initial_actuator": spec.initial_actuator,
    });
    hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
}

/// Kind of a config file, guessed from its top-level keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileKind {
    Ship,
    Port,
    Scenario,
    Study,
}

pub fn detect_kind(text: &str) -> Option<FileKind> {
    let table: toml::Table = text.parse().ok()?;
    if table.contains_key("particulars") {
        Some(FileKind::Ship)
    } else if table.contains_key("boundary") {
        Some(FileKind::Port)
    } else if table.contains_key("n_cases") {
        Some(FileKind::Study)
    } else if table.contains_key("ship") {
        Some(FileKind::Scenario)
    } else {
        None
    }
}

/// Schema and invariant check of one file. Referenced files of scenarios
/// and studies are checked as well.
pub fn validate_file(path: &Path) -> Result<FileKind, ConfigError> {
    let text = read(path)?;
    let kind = detect_kind(&text).ok_or_else(|| ConfigError::Parse {
        path: path.to_path_buf(),
        message: "not valid TOML or not a ship, port, scenario or study file".into(),
    })?;
    match kind {
        FileKind::Ship => {
            load_ship(path)?;
        }
        FileKind::Port => {
            load_port(path)?;
        }
        FileKind::Scenario => {
            let s = load_scenario(path, None, None)?;
            s.spec.validate().map_err(|e| invalid(path, vec![e.to_string()]))?;
        }
        FileKind::Study => {
            let s = load_study(path, None, None)?;
            s.template.validate().map_err(|e| invalid(path, vec![e.to_string()]))?;
        }
    }
    Ok(kind)
}
