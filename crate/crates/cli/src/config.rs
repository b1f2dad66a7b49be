//! Scenario files.
//!
//! Units: lengths in m, densities per unit length, stiffness profiles in the
//! model's force units, times in s. No unit parsing is done.

use std::fmt;
use std::path::{Path, PathBuf};

use degbeam::constants::CbcVariant;
use degbeam::hum::Preconditioner;
use degbeam::initial::InitialData;
use degbeam::{BeamModel, BoundaryCondition, Feedback, ProfileFamily};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Constants,
    Simulate,
    Stabilize,
    Verify,
    Control,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Task::Constants => "constants",
            Task::Simulate => "simulate",
            Task::Stabilize => "stabilize",
            Task::Verify => "verify",
            Task::Control => "control",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub rho: f64,
    pub i_rho: f64,
    #[serde(default = "one")]
    pub ell: f64,
    #[serde(rename = "K")]
    pub k: ProfileFamily,
    #[serde(rename = "EI")]
    pub ei: ProfileFamily,
    pub bc: BoundaryCondition,
    #[serde(default)]
    pub feedback: Option<Feedback>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub n: usize,
    /// Overrides `p = max{1, 2/(2−μ)}`.
    #[serde(default)]
    pub grading: Option<f64>,
}

/// `T` is given directly or as a multiple of the model's observability threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(rename = "T", default)]
    pub horizon: Option<f64>,
    #[serde(default)]
    pub threshold_factor: Option<f64>,
    #[serde(default)]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlConfig {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub preconditioner: Preconditioner,
    #[serde(default = "default_window")]
    pub stagnation_window: usize,
    /// State to reach at `T` instead of rest.
    #[serde(default)]
    pub target: Option<InitialData>,
}

fn default_tol() -> f64 {
    1e-8
}

fn default_max_iter() -> usize {
    2000
}

fn default_window() -> usize {
    degbeam::hum::STAGNATION_WINDOW
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            tol: default_tol(),
            max_iter: default_max_iter(),
            preconditioner: Preconditioner::default(),
            stagnation_window: default_window(),
            target: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    /// Time window `[s, t]` of the multiplier identities; defaults to the whole run.
    #[serde(default)]
    pub window: Option<[f64; 2]>,
    /// Relative residual accepted for the identities.
    #[serde(default = "default_identity_tol")]
    pub identity_tol: f64,
    #[serde(default)]
    pub cbc: CbcVariant,
}

fn default_identity_tol() -> f64 {
    0.05
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { window: None, identity_tol: default_identity_tol(), cbc: CbcVariant::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_dir() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub task: Option<Task>,
    pub model: ModelConfig,
    #[serde(default)]
    pub mesh: Option<MeshConfig>,
    #[serde(default)]
    pub time: Option<TimeConfig>,
    #[serde(default)]
    pub initial: Option<InitialData>,
    #[serde(default)]
    pub control: ControlConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// A config problem tied to a dotted field path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.field.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.field, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

/// serde reports a missing field at its parent; append the field name.
fn field_path(parent: &str, message: &str) -> String {
    let missing = message
        .strip_prefix("missing field `")
        .and_then(|rest| rest.split('`').next());
    match (parent, missing) {
        (".", Some(f)) => f.to_string(),
        (_, Some(f)) => format!("{parent}.{f}"),
        (".", None) => String::new(),
        (_, None) => parent.to_string(),
    }
}

pub fn parse(text: &str) -> Result<Scenario, ConfigError> {
    let de = toml::Deserializer::parse(text).map_err(|e| ConfigError::new("", e.message().to_string()))?;
    let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let message = e.inner().message().to_string();
        ConfigError::new(field_path(&e.path().to_string(), &message), message)
    })?;
    Ok(scenario)
}

pub fn load(path: &Path) -> Result<Scenario, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

impl ModelConfig {
    pub fn build(&self) -> Result<BeamModel, ConfigError> {
        BeamModel::new(self.rho, self.i_rho, self.ell, self.k.clone(), self.ei.clone(), self.bc, self.feedback)
            .map_err(|e| ConfigError::new("model", e.to_string()))
    }
}

impl Scenario {
    pub fn mesh(&self) -> Result<&MeshConfig, ConfigError> {
        let m = self.mesh.as_ref().ok_or_else(|| ConfigError::new("mesh", "section required for this task"))?;
        if m.n < 2 {
            return Err(ConfigError::new("mesh.n", format!("need at least 2 elements, got {}", m.n)));
        }
        if let Some(p) = m.grading {
            if !(p >= 1.0 && p.is_finite()) {
                return Err(ConfigError::new("mesh.grading", format!("must be >= 1, got {p}")));
            }
        }
        Ok(m)
    }

    pub fn time(&self) -> Result<&TimeConfig, ConfigError> {
        let t = self.time.as_ref().ok_or_else(|| ConfigError::new("time", "section required for this task"))?;
        match (t.horizon, t.threshold_factor) {
            (Some(_), Some(_)) => return Err(ConfigError::new("time", "give either T or threshold_factor, not both")),
            (None, None) => return Err(ConfigError::new("time.T", "missing field `T`")),
            (Some(h), None) if !(h > 0.0 && h.is_finite()) => {
                return Err(ConfigError::new("time.T", format!("must be positive, got {h}")))
            }
            (None, Some(f)) if !(f > 0.0 && f.is_finite()) => {
                return Err(ConfigError::new("time.threshold_factor", format!("must be positive, got {f}")))
            }
            _ => {}
        }
        if let Some(dt) = t.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(ConfigError::new("time.dt", format!("must be positive, got {dt}")));
            }
        }
        Ok(t)
    }

    pub fn initial(&self) -> Result<&InitialData, ConfigError> {
        self.initial.as_ref().ok_or_else(|| ConfigError::new("initial", "section required for this task"))
    }
}
