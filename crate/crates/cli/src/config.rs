//! Scenario configuration files.
//!
//! TOML with three sections; unknown keys are rejected by name and all
//! validation failures are reported together.

use std::path::{Path, PathBuf};

use asyncgl_core::Physics;
use serde::Deserialize;

use crate::error::CliError;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 10_000;
pub const DEFAULT_MAX_DELAY: usize = 2;
pub const DEFAULT_REFINEMENT: usize = 4;
/// Desk-scale cap on cube patches per direction.
pub const MAX_CUBE_N: usize = 3;
pub const MAX_REFINEMENT: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhysicsName {
    Thermal,
    Elasticity,
}

impl PhysicsName {
    pub fn physics(self) -> Physics {
        match self {
            PhysicsName::Thermal => Physics::Thermal,
            PhysicsName::Elasticity => Physics::Elasticity,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PhysicsName::Thermal => "thermal",
            PhysicsName::Elasticity => "elasticity",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Geometry {
    #[serde(rename = "two-patch-2d")]
    TwoPatch2d,
    #[serde(rename = "cube-grid-3d")]
    CubeGrid3d,
    ImbalancedGrid,
}

impl Geometry {
    pub fn name(self) -> &'static str {
        match self {
            Geometry::TwoPatch2d => "two-patch-2d",
            Geometry::CubeGrid3d => "cube-grid-3d",
            Geometry::ImbalancedGrid => "imbalanced-grid",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    SyncFixed,
    SyncAitken,
    AsyncSim,
    AsyncConcurrent,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::SyncFixed,
        Variant::SyncAitken,
        Variant::AsyncSim,
        Variant::AsyncConcurrent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::SyncFixed => "sync-fixed",
            Variant::SyncAitken => "sync-aitken",
            Variant::AsyncSim => "async-sim",
            Variant::AsyncConcurrent => "async-concurrent",
        }
    }

    pub fn is_async(self) -> bool {
        matches!(self, Variant::AsyncSim | Variant::AsyncConcurrent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleName {
    #[default]
    Random,
    VirtualTime,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub physics: PhysicsName,
    pub geometry: Geometry,
    /// Patches per direction of `cube-grid-3d`.
    pub n: Option<usize>,
    /// Refinement seed of `imbalanced-grid`.
    pub seed: Option<u64>,
    /// Fine cells per global cell edge of `two-patch-2d`.
    pub refinement: Option<usize>,
    /// Coefficient divisor inside the inclusions.
    pub contrast: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub variant: Variant,
    /// Fixed relaxation, or the initial one for Aitken. Asynchronous
    /// variants default to 0.9 of the certified bound for `max_delay`.
    pub omega: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_max_delay")]
    pub max_delay: usize,
    #[serde(default)]
    pub schedule: ScheduleName,
    #[serde(default)]
    pub schedule_seed: u64,
    /// Thread count of `async-concurrent` (global rank included).
    pub ranks: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// When false every wall-clock column is written as 0.
    #[serde(default = "default_true")]
    pub wall_time: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_dir(),
            wall_time: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub problem: ProblemConfig,
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}

fn default_max_delay() -> usize {
    DEFAULT_MAX_DELAY
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_true() -> bool {
    true
}

impl ProblemConfig {
    pub fn new(physics: PhysicsName, geometry: Geometry) -> Self {
        ProblemConfig {
            physics,
            geometry,
            n: None,
            seed: None,
            refinement: None,
            contrast: None,
        }
    }

    /// Short case label, e.g. `cube-grid-3d-n2-thermal`.
    pub fn case_name(&self) -> String {
        let size = match self.geometry {
            Geometry::TwoPatch2d => String::new(),
            Geometry::CubeGrid3d => format!("-n{}", self.n.unwrap_or(0)),
            Geometry::ImbalancedGrid => format!("-s{}", self.seed.unwrap_or(0)),
        };
        format!("{}{}-{}", self.geometry.name(), size, self.physics.name())
    }

    fn check(&self, errors: &mut Vec<String>) {
        let g = self.geometry.name();
        match self.geometry {
            Geometry::CubeGrid3d => match self.n {
                None => errors.push(format!("problem.n is required for {g}")),
                Some(n) if n == 0 || n > MAX_CUBE_N => {
                    errors.push(format!("problem.n = {n} outside 1..={MAX_CUBE_N}"))
                }
                Some(_) => {}
            },
            _ if self.n.is_some() => errors.push(format!("problem.n does not apply to {g}")),
            _ => {}
        }
        if self.seed.is_some() && self.geometry != Geometry::ImbalancedGrid {
            errors.push(format!("problem.seed does not apply to {g}"));
        }
        match (self.geometry, self.refinement) {
            (Geometry::TwoPatch2d, Some(r)) if r == 0 || r > MAX_REFINEMENT => {
                errors.push(format!("problem.refinement = {r} outside 1..={MAX_REFINEMENT}"))
            }
            (Geometry::TwoPatch2d, _) | (_, None) => {}
            (_, Some(_)) => errors.push(format!("problem.refinement does not apply to {g}")),
        }
        if let Some(c) = self.contrast {
            if self.geometry == Geometry::ImbalancedGrid {
                errors.push(format!("problem.contrast does not apply to {g}"));
            } else if !(c > 0.0 && c.is_finite()) {
                errors.push(format!("problem.contrast must be positive, got {c}"));
            }
        }
    }
}

impl SolverConfig {
    pub fn new(variant: Variant) -> Self {
        SolverConfig {
            variant,
            omega: None,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            max_delay: DEFAULT_MAX_DELAY,
            schedule: ScheduleName::default(),
            schedule_seed: 0,
            ranks: None,
        }
    }

    fn check(&self, errors: &mut Vec<String>) {
        if let Some(w) = self.omega {
            if !(w > 0.0 && w.is_finite()) {
                errors.push(format!("solver.omega must be positive, got {w}"));
            }
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            errors.push(format!("solver.tol = {} outside (0, 1)", self.tol));
        }
        if self.max_iter == 0 {
            errors.push("solver.max_iter must be at least 1".into());
        }
        if let Some(r) = self.ranks {
            if self.variant != Variant::AsyncConcurrent {
                errors.push(format!("solver.ranks does not apply to {}", self.variant.name()));
            } else if r < 2 {
                errors.push(format!("solver.ranks = {r}, need at least 2"));
            }
        }
    }
}

impl ScenarioConfig {
    pub fn new(problem: ProblemConfig, solver: SolverConfig) -> Self {
        ScenarioConfig {
            problem,
            solver,
            output: OutputConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let mut errors = Vec::new();
        self.problem.check(&mut errors);
        self.solver.check(&mut errors);
        if errors.is_empty() {
            Ok(())
        } else {
            Err(CliError::Validation(errors))
        }
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| CliError::Parse(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    ScenarioConfig::parse(&text)
}
