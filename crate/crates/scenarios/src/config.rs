//! Scenario files: one TOML document per run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use continuum_core::configspace::GridSpec;
use continuum_core::hydrodynamics::DEFAULT_NODE_FRACTION;
use continuum_core::measure::{AxisBox, Region, Surface};
use continuum_core::measurement::MeasurementSetup;
use continuum_core::worlds::Seeding;
use continuum_core::{Grid, PhysicsParams, StateRecipe};
use serde::{Deserialize, Serialize};

pub const ANALYSIS_KINDS: &[&str] = &["continuity", "bundle", "measure", "measurement", "miw", "toy_model", "quantization"];

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("analysis[{index}]: unknown kind `{kind}`{hint}; expected one of: {known}")]
    UnknownAnalysis { index: usize, kind: String, hint: String, known: String },
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: field.into(), message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub seed: u64,
    pub grid: GridSpec,
    #[serde(default)]
    pub physics: PhysicsParams,
    /// Initial state. With a measurement analysis this is the system state
    /// on axis 0 and the run starts from the post-measurement state.
    pub state: StateRecipe,
    pub run: RunSpec,
    #[serde(default)]
    pub analysis: Vec<Analysis>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Threshold overrides by metric name.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameOutput {
    #[default]
    All,
    Endpoints,
    None,
}

fn default_dt_traj() -> f64 {
    1e-2
}

fn default_node_fraction() -> f64 {
    DEFAULT_NODE_FRACTION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub dt_step: f64,
    pub n_steps: usize,
    pub frame_stride: usize,
    #[serde(default = "default_dt_traj")]
    pub dt_traj: f64,
    #[serde(default = "default_node_fraction")]
    pub node_fraction: f64,
    #[serde(default)]
    pub frames: FrameOutput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub name: String,
    pub boxes: Vec<BoxSpec>,
}

impl RegionSpec {
    pub fn build(&self, grid: &Grid) -> Result<Region, ConfigError> {
        let boxes = self.boxes.iter().map(|b| AxisBox::new(&b.lo, &b.hi)).collect();
        Region::new(grid, boxes).map_err(|e| invalid(format!("region `{}`", self.name), e.to_string()))
    }
}

fn plus_one() -> i8 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceSpec {
    pub name: String,
    pub axis: usize,
    pub level: f64,
    #[serde(default = "plus_one")]
    pub orientation: i8,
}

impl SurfaceSpec {
    pub fn build(&self) -> Surface {
        Surface::new(self.axis, self.level, self.orientation)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrajectoryOracle {
    /// Spreading law of a free Gaussian given by the state recipe.
    FreeGaussian,
    /// Every world stays where it started.
    Static,
}

fn default_refine() -> usize {
    4
}

fn default_cutoff() -> f64 {
    1e-10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquivarianceSpec {
    #[serde(default = "default_refine")]
    pub refine: usize,
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
    /// Repeat with a world lattice twice as fine.
    #[serde(default)]
    pub refinement_check: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementRoute {
    #[default]
    Impulsive,
    Dynamical,
}

fn default_control() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollapseSpec {
    pub outcome: usize,
    pub start: [f64; 2],
    pub horizon: f64,
    pub dt_step: f64,
    pub frame_stride: usize,
    pub dt_traj: f64,
    /// Pointer separation of the negative control, in units of `sigma_z`.
    #[serde(default = "default_control")]
    pub control_separation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopRoute {
    #[default]
    Velocity,
    Phase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameChoice {
    #[default]
    Initial,
    Final,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LoopSpec {
    Circle {
        center: [f64; 2],
        radius: f64,
        samples: usize,
        #[serde(default = "one_turn")]
        turns: i32,
    },
    Segment { a: f64, b: f64, samples: usize },
}

fn one_turn() -> i32 {
    1
}

fn three() -> usize {
    3
}

fn ten() -> usize {
    10
}

fn toy_points() -> Vec<f64> {
    vec![0.04, 0.25, 0.81]
}

fn toy_cells() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Analysis {
    /// Continuity residual under joint refinement of spacing and frame
    /// interval.
    Continuity {
        #[serde(default = "three")]
        levels: usize,
    },
    Bundle {
        seeding: Seeding,
        #[serde(default)]
        collision_radius: f64,
        #[serde(default)]
        oracle: Option<TrajectoryOracle>,
        /// Also integrate the second-order equation and compare.
        #[serde(default)]
        newtonian: bool,
        #[serde(default)]
        equivariance: Option<EquivarianceSpec>,
    },
    Measure {
        regions: Vec<RegionSpec>,
        #[serde(default)]
        surfaces: Vec<SurfaceSpec>,
    },
    Measurement {
        setup: MeasurementSetup,
        #[serde(default)]
        route: MeasurementRoute,
        #[serde(default = "ten")]
        steps: usize,
        #[serde(default)]
        collapse: Option<CollapseSpec>,
    },
    Miw {
        ks: Vec<usize>,
        seeds: Vec<u64>,
        regions: Vec<RegionSpec>,
    },
    ToyModel {
        #[serde(default = "toy_points")]
        a_values: Vec<f64>,
        #[serde(default = "toy_cells")]
        cells: usize,
    },
    Quantization {
        path: LoopSpec,
        expected: i64,
        #[serde(default)]
        route: LoopRoute,
        #[serde(default)]
        frame: FrameChoice,
    },
}

impl Analysis {
    pub fn kind(&self) -> &'static str {
        match self {
            Analysis::Continuity { .. } => "continuity",
            Analysis::Bundle { .. } => "bundle",
            Analysis::Measure { .. } => "measure",
            Analysis::Measurement { .. } => "measurement",
            Analysis::Miw { .. } => "miw",
            Analysis::ToyModel { .. } => "toy_model",
            Analysis::Quantization { .. } => "quantization",
        }
    }
}

fn check_kinds(doc: &toml::Table) -> Result<(), ConfigError> {
    let Some(list) = doc.get("analysis") else { return Ok(()) };
    let Some(list) = list.as_array() else {
        return Err(invalid("analysis", "must be an array of tables ([[analysis]])"));
    };
    for (index, entry) in list.iter().enumerate() {
        let kind = entry.get("kind").and_then(|k| k.as_str());
        let Some(kind) = kind else {
            return Err(invalid(format!("analysis[{index}]"), "missing string field `kind`"));
        };
        if !ANALYSIS_KINDS.contains(&kind) {
            let best = ANALYSIS_KINDS
                .iter()
                .map(|k| (strsim::levenshtein(kind, k), *k))
                .min()
                .filter(|(d, _)| *d <= 3)
                .map(|(_, k)| format!(" (did you mean `{k}`?)"))
                .unwrap_or_default();
            return Err(ConfigError::UnknownAnalysis {
                index,
                kind: kind.to_string(),
                hint: best,
                known: ANALYSIS_KINDS.join(", "),
            });
        }
    }
    Ok(())
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let doc: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        check_kinds(&doc)?;
        let config: ScenarioConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn measurement(&self) -> Option<&MeasurementSetup> {
        self.analysis.iter().find_map(|a| match a {
            Analysis::Measurement { setup, .. } => Some(setup),
            _ => None,
        })
    }

    /// The configuration grid. With a measurement this is the `(x, z)` grid.
    pub fn grid(&self) -> Result<Grid, ConfigError> {
        Grid::try_from(self.grid.clone()).map_err(|e| invalid("grid", e.to_string()))
    }

    /// Checks every field without running any numerics.
    pub fn validate(&self) -> Result<Vec<String>, ConfigError> {
        let mut notes = Vec::new();
        if self.name.trim().is_empty() {
            return Err(invalid("name", "must not be empty"));
        }
        let grid = self.grid()?;
        self.physics.validate(grid.dim()).map_err(|e| invalid("physics", e.to_string()))?;
        let run = &self.run;
        if !(run.dt_step > 0.0 && run.dt_step.is_finite()) {
            return Err(invalid("run.dt_step", format!("must be positive, got {}", run.dt_step)));
        }
        if run.frame_stride == 0 {
            return Err(invalid("run.frame_stride", "must be at least 1"));
        }
        if run.n_steps < run.frame_stride {
            return Err(invalid("run.n_steps", "must cover at least one frame stride"));
        }
        if !(run.dt_traj > 0.0 && run.dt_traj.is_finite()) {
            return Err(invalid("run.dt_traj", format!("must be positive, got {}", run.dt_traj)));
        }
        if !(run.node_fraction > 0.0 && run.node_fraction < 1.0) {
            return Err(invalid("run.node_fraction", "must lie in (0, 1)"));
        }
        for (name, value) in &self.tolerances {
            if !(*value > 0.0 && value.is_finite()) {
                return Err(invalid(format!("tolerances.{name}"), "must be positive"));
            }
        }
        let measurements = self.analysis.iter().filter(|a| matches!(a, Analysis::Measurement { .. })).count();
        if measurements > 1 {
            return Err(invalid("analysis", "at most one measurement analysis per scenario"));
        }
        // the grid the analyses see after the optional measurement
        for (i, analysis) in self.analysis.iter().enumerate() {
            let field = |f: &str| format!("analysis[{i}] ({}).{f}", analysis.kind());
            match analysis {
                Analysis::Continuity { levels } => {
                    if *levels < 2 {
                        return Err(invalid(field("levels"), "needs at least two refinement levels"));
                    }
                    if !run.frame_stride.is_multiple_of(1 << (levels - 1)) {
                        return Err(invalid(field("levels"), format!("run.frame_stride must be divisible by {}", 1 << (levels - 1))));
                    }
                    if run.n_steps < 3 * run.frame_stride {
                        return Err(invalid(field("levels"), "the run needs at least three frames"));
                    }
                }
                Analysis::Bundle { seeding, collision_radius, equivariance, oracle, .. } => {
                    check_seeding(seeding, &grid).map_err(|m| invalid(field("seeding"), m))?;
                    if collision_radius.is_nan() || *collision_radius < 0.0 {
                        return Err(invalid(field("collision_radius"), "must be non-negative"));
                    }
                    if let Some(eq) = equivariance {
                        if eq.refine == 0 || !(eq.cutoff > 0.0 && eq.cutoff < 1.0) {
                            return Err(invalid(field("equivariance"), "refine must be positive and cutoff in (0, 1)"));
                        }
                    }
                    if matches!(oracle, Some(TrajectoryOracle::FreeGaussian)) {
                        let gaussian = matches!(self.state, StateRecipe::Gaussian { .. });
                        if !gaussian || !self.physics.potential.is_free() || measurements > 0 {
                            return Err(invalid(field("oracle"), "free_gaussian needs a Gaussian state without potential"));
                        }
                    }
                }
                Analysis::Measure { regions, surfaces } => {
                    for r in regions {
                        r.build(&grid)?;
                    }
                    for s in surfaces {
                        s.build().validate(&grid).map_err(|e| invalid(format!("surface `{}`", s.name), e.to_string()))?;
                    }
                }
                Analysis::Measurement { setup, steps, collapse, .. } => {
                    if let Some(w) = setup.validate(&grid).map_err(|e| invalid(field("setup"), e.to_string()))? {
                        notes.push(w);
                    }
                    if *steps == 0 {
                        return Err(invalid(field("steps"), "must be at least 1"));
                    }
                    if let Some(c) = collapse {
                        if c.outcome >= setup.outcomes.len() {
                            return Err(invalid(field("collapse.outcome"), "no such outcome"));
                        }
                        if !(c.horizon > 0.0 && c.dt_step > 0.0 && c.dt_traj > 0.0 && c.frame_stride > 0 && c.control_separation > 0.0) {
                            return Err(invalid(field("collapse"), "horizon, steps and control separation must be positive"));
                        }
                    }
                }
                Analysis::Miw { ks, seeds, regions } => {
                    if ks.len() < 2 || ks.iter().any(|k| *k < 2) {
                        return Err(invalid(field("ks"), "needs at least two ensemble sizes of two or more worlds"));
                    }
                    if seeds.is_empty() {
                        return Err(invalid(field("seeds"), "needs at least one seed"));
                    }
                    if regions.is_empty() {
                        return Err(invalid(field("regions"), "needs at least one outcome region"));
                    }
                    let built = regions.iter().map(|r| r.build(&grid)).collect::<Result<Vec<_>, _>>()?;
                    for a in 0..built.len() {
                        for b in a + 1..built.len() {
                            if !built[a].is_disjoint(&built[b]) {
                                return Err(invalid(field("regions"), format!("`{}` and `{}` overlap", regions[a].name, regions[b].name)));
                            }
                        }
                    }
                }
                Analysis::ToyModel { a_values, cells } => {
                    if *cells < 2 || a_values.iter().any(|a| !(*a > 0.0 && *a <= 1.0)) {
                        return Err(invalid(field("a_values"), "values must lie in (0, 1] and cells be at least 2"));
                    }
                }
                Analysis::Quantization { path, .. } => match path {
                    LoopSpec::Circle { radius, samples, .. } => {
                        if grid.dim() != 2 || !(*radius > 0.0) || *samples < 8 {
                            return Err(invalid(field("path"), "a circle needs a 2D grid, positive radius and 8 samples"));
                        }
                    }
                    LoopSpec::Segment { a, b, samples } => {
                        if grid.dim() != 1 || !(a < b) || *samples < 2 {
                            return Err(invalid(field("path"), "a segment needs a 1D grid, a < b and two samples"));
                        }
                    }
                },
            }
        }
        Ok(notes)
    }
}

fn check_seeding(seeding: &Seeding, grid: &Grid) -> Result<(), String> {
    let dim = grid.dim();
    match seeding {
        Seeding::Uniform { lo, hi, count } => {
            if lo.len() != dim || hi.len() != dim || count.len() != dim {
                return Err(format!("uniform seeding needs {dim} entries in lo, hi and count"));
            }
            for a in 0..dim {
                if !(lo[a] <= hi[a]) || lo[a] < grid.min(a) || hi[a] >= grid.max(a) || count[a] == 0 {
                    return Err(format!("axis {a}: [{}, {}] must lie inside the grid", lo[a], hi[a]));
                }
            }
        }
        Seeding::DensitySampled { count, .. } => {
            if *count < 2 {
                return Err("density sampling needs at least two worlds".into());
            }
        }
        Seeding::Explicit { points } => {
            if points.is_empty() || points.iter().any(|p| p.len() != dim) {
                return Err(format!("explicit points need {dim} coordinates each"));
            }
        }
    }
    Ok(())
}
