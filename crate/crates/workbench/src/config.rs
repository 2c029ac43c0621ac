//! Run configuration: a strict JSON schema with documented defaults.
//!
//! ```json
//! {
//!   "grid": {"nx": 64, "ny": 64, "lx": 1.0, "ly": 1.0},
//!   "bc_mode": "dirichlet",
//!   "params": {"nu": 1.0, "lambda": 1.0, "gamma": 1.0},
//!   "potential": {"kind": "gl", "eta": 0.25},
//!   "initial": {"preset": "cavity"},
//!   "boundary": {"preset": "cavity"},
//!   "dt": {"policy": "adaptive", "cap": 0.01},
//!   "t_max": 50.0,
//!   "residual_target": 1e-6
//! }
//! ```
//!
//! Required keys: `grid` (with `nx`, `ny`), `potential`, `t_max`. Everything
//! else has a default, see [`SimConfig`].

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use nematic_core::grid::{BcMode, Grid};
use nematic_core::linsolve::{LinearMethod, LinearSolveConfig};
use nematic_core::material::{Params, Potential};
use nematic_core::simulator::{DtPolicy, RunConfig, StoppingCriteria};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("config value `{path}` out of range: {message}")]
    Range { path: String, message: String },
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn range(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Range { path: path.to_string(), message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    #[serde(default = "one")]
    pub lx: f64,
    #[serde(default = "one")]
    pub ly: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BcSpec {
    Dirichlet,
    FreeSlip,
    Periodic,
}

impl From<BcSpec> for BcMode {
    fn from(b: BcSpec) -> Self {
        match b {
            BcSpec::Dirichlet => BcMode::Dirichlet,
            BcSpec::FreeSlip => BcMode::FreeSlip,
            BcSpec::Periodic => BcMode::Periodic,
        }
    }
}

impl From<BcMode> for BcSpec {
    fn from(b: BcMode) -> Self {
        match b {
            BcMode::Dirichlet => BcSpec::Dirichlet,
            BcMode::FreeSlip => BcSpec::FreeSlip,
            BcMode::Periodic => BcSpec::Periodic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSpec {
    #[serde(default = "one")]
    pub nu: f64,
    #[serde(default = "one")]
    pub lambda: f64,
    #[serde(default = "one")]
    pub gamma: f64,
}

impl Default for ParamsSpec {
    fn default() -> Self {
        Self { nu: 1.0, lambda: 1.0, gamma: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    Gl { eta: f64 },
    Quadratic { kappa: f64 },
}

impl From<PotentialSpec> for Potential {
    fn from(p: PotentialSpec) -> Self {
        match p {
            PotentialSpec::Gl { eta } => Potential::GinzburgLandau { eta },
            PotentialSpec::Quadratic { kappa } => Potential::Quadratic { kappa },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// Named initial data, see `presets`.
    Preset(String),
    /// Path to a `NEMQ1` snapshot with matching grid.
    Snapshot(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundarySpec {
    /// Trace of the named preset.
    Preset(String),
    /// Same director vector on every boundary face.
    Constant(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
pub enum DtSpec {
    Fixed { value: f64 },
    Adaptive { cap: f64 },
}

impl Default for DtSpec {
    fn default() -> Self {
        DtSpec::Adaptive { cap: 1e-2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodSpec {
    Spectral,
    Cg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearSpec {
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_method")]
    pub method: MethodSpec,
}

fn default_rel_tol() -> f64 {
    1e-10
}
fn default_max_iterations() -> usize {
    10_000
}
fn default_method() -> MethodSpec {
    MethodSpec::Spectral
}

impl Default for LinearSpec {
    fn default() -> Self {
        Self { rel_tol: default_rel_tol(), max_iterations: default_max_iterations(), method: default_method() }
    }
}

/// Full description of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub grid: GridSpec,
    /// Default `dirichlet`.
    #[serde(default = "default_bc")]
    pub bc_mode: BcSpec,
    /// Default `nu = lambda = gamma = 1`.
    #[serde(default)]
    pub params: ParamsSpec,
    pub potential: PotentialSpec,
    /// Director components, 2 (default) or 3.
    #[serde(default = "default_m")]
    pub m: usize,
    /// Default `{"preset": "cavity"}`.
    #[serde(default = "default_initial")]
    pub initial: InitialSpec,
    /// Required for Dirichlet runs unless `initial` is a preset, in which case
    /// the preset's own trace is used.
    #[serde(default)]
    pub boundary: Option<BoundarySpec>,
    /// Default adaptive with cap `1e-2`.
    #[serde(default)]
    pub dt: DtSpec,
    pub t_max: f64,
    #[serde(default)]
    pub residual_target: Option<f64>,
    #[serde(default)]
    pub max_steps: Option<usize>,
    /// Default 10.
    #[serde(default = "default_record_interval")]
    pub record_interval: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed_label: Option<String>,
    #[serde(default)]
    pub linear: LinearSpec,
}

fn default_bc() -> BcSpec {
    BcSpec::Dirichlet
}
fn default_m() -> usize {
    2
}
fn default_initial() -> InitialSpec {
    InitialSpec::Preset("cavity".into())
}
fn default_record_interval() -> usize {
    10
}

/// Parses and validates a config document.
pub fn parse_config(text: &str) -> Result<SimConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: SimConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ConfigError::Parse { path, message: e.into_inner().to_string() }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &std::path::Path) -> Result<SimConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
    parse_config(&text)
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let pos = |path: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(range(path, format!("must be finite and > 0, got {v}")))
            }
        };
        if self.grid.nx < 4 {
            return Err(range("grid.nx", format!("must be >= 4, got {}", self.grid.nx)));
        }
        if self.grid.ny < 4 {
            return Err(range("grid.ny", format!("must be >= 4, got {}", self.grid.ny)));
        }
        pos("grid.lx", self.grid.lx)?;
        pos("grid.ly", self.grid.ly)?;
        pos("params.nu", self.params.nu)?;
        pos("params.gamma", self.params.gamma)?;
        if !(self.params.lambda.is_finite() && self.params.lambda >= 0.0) {
            return Err(range("params.lambda", format!("must be finite and >= 0, got {}", self.params.lambda)));
        }
        match self.potential {
            PotentialSpec::Gl { eta } => pos("potential.eta", eta)?,
            PotentialSpec::Quadratic { kappa } => pos("potential.kappa", kappa)?,
        }
        if self.m != 2 && self.m != 3 {
            return Err(range("m", format!("must be 2 or 3, got {}", self.m)));
        }
        match self.dt {
            DtSpec::Fixed { value } => pos("dt.value", value)?,
            DtSpec::Adaptive { cap } => pos("dt.cap", cap)?,
        }
        if self.t_max.is_nan() || self.t_max < 0.0 {
            return Err(range("t_max", format!("must be >= 0, got {}", self.t_max)));
        }
        if let Some(r) = self.residual_target {
            pos("residual_target", r)?;
        }
        if self.record_interval == 0 {
            return Err(range("record_interval", "must be >= 1"));
        }
        if !(self.linear.rel_tol > 0.0 && self.linear.rel_tol <= 1e-4) {
            return Err(range("linear.rel_tol", format!("must lie in (0, 1e-4], got {}", self.linear.rel_tol)));
        }
        if self.linear.max_iterations == 0 {
            return Err(range("linear.max_iterations", "must be >= 1"));
        }
        if let Some(BoundarySpec::Constant(v)) = &self.boundary {
            if v.len() != self.m {
                return Err(range("boundary.constant", format!("needs {} components, got {}", self.m, v.len())));
            }
        }
        let dirichlet = self.bc_mode == BcSpec::Dirichlet;
        if !dirichlet && self.boundary.is_some() {
            return Err(range("boundary", "director trace data is only accepted with bc_mode = dirichlet"));
        }
        if dirichlet && self.boundary.is_none() && matches!(self.initial, InitialSpec::Snapshot(_)) {
            return Err(range("boundary", "required when bc_mode = dirichlet and the initial data is a snapshot"));
        }
        if let InitialSpec::Preset(name) = &self.initial {
            crate::presets::check_name(name).map_err(|m| range("initial.preset", m))?;
        }
        if let Some(BoundarySpec::Preset(name)) = &self.boundary {
            crate::presets::check_name(name).map_err(|m| range("boundary.preset", m))?;
        }
        Ok(())
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self.grid.nx, self.grid.ny, self.grid.lx, self.grid.ly, self.bc_mode.into())
            .expect("validated grid")
    }

    pub fn params(&self) -> Params {
        Params {
            nu: self.params.nu,
            lambda: self.params.lambda,
            gamma: self.params.gamma,
            potential: self.potential.into(),
        }
    }

    pub fn linear(&self) -> LinearSolveConfig {
        LinearSolveConfig {
            rel_tol: self.linear.rel_tol,
            max_iterations: self.linear.max_iterations,
            method: match self.linear.method {
                MethodSpec::Spectral => LinearMethod::Spectral,
                MethodSpec::Cg => LinearMethod::ConjugateGradient,
            },
        }
    }

    pub fn run_config(&self) -> RunConfig {
        RunConfig {
            dt: match self.dt {
                DtSpec::Fixed { value } => DtPolicy::Fixed(value),
                DtSpec::Adaptive { cap } => DtPolicy::Adaptive { cap },
            },
            stopping: StoppingCriteria {
                t_max: self.t_max,
                residual_target: self.residual_target,
                max_steps: self.max_steps,
            },
            record_interval: self.record_interval,
        }
    }

    /// Canonical JSON with every default spelled out.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"grid": {"nx": 16, "ny": 8}, "potential": {"kind": "gl", "eta": 0.3}, "t_max": 1.0}"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.dt, DtSpec::Adaptive { cap: 1e-2 });
        assert_eq!(c.record_interval, 10);
        assert_eq!(c.bc_mode, BcSpec::Dirichlet);
        assert_eq!(c.params, ParamsSpec::default());
        assert_eq!(c.m, 2);
    }

    #[test]
    fn negative_viscosity_names_key() {
        let text = MINIMAL.replace("\"t_max\"", "\"params\": {\"nu\": -1}, \"t_max\"");
        let e = parse_config(&text).unwrap_err().to_string();
        assert!(e.contains("params.nu"), "{e}");
    }

    #[test]
    fn duplicate_and_unknown_keys_rejected() {
        let dup = r#"{"grid": {"nx": 16, "nx": 16, "ny": 8}, "potential": {"kind": "gl", "eta": 0.3}, "t_max": 1}"#;
        let e = parse_config(dup).unwrap_err().to_string();
        assert!(e.contains("duplicate"), "{e}");
        let unk = MINIMAL.replace("\"t_max\"", "\"params\": {\"viscosity\": 1}, \"t_max\"");
        let e = parse_config(&unk).unwrap_err().to_string();
        assert!(e.contains("params") && e.contains("viscosity"), "{e}");
        let missing = r#"{"grid": {"nx": 16, "ny": 8}, "t_max": 1}"#;
        assert!(parse_config(missing).unwrap_err().to_string().contains("potential"));
    }

    #[test]
    fn trace_rules() {
        let fs = MINIMAL.replace("\"t_max\"", "\"bc_mode\": \"free_slip\", \"boundary\": {\"constant\": [1, 0]}, \"t_max\"");
        assert!(parse_config(&fs).unwrap_err().to_string().contains("boundary"));
        let snap = MINIMAL.replace("\"t_max\"", "\"initial\": {\"snapshot\": \"x.snap\"}, \"t_max\"");
        assert!(parse_config(&snap).unwrap_err().to_string().contains("boundary"));
    }

    #[test]
    fn normalization_is_idempotent() {
        let c = parse_config(MINIMAL).unwrap();
        let again = parse_config(&c.to_json()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.to_json(), again.to_json());
    }
}
