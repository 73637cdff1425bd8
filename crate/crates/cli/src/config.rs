//! Run configuration: a JSON document, every field optional.

use serde::{Deserialize, Serialize};
use spherepol::geometry::{make_alternating_lattice, make_layered_lattice, SphereSystem};
use spherepol::operators::Backend;
use spherepol::solver::SolveSettings;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("referenced file does not exist: {0}")]
    MissingFile(PathBuf),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatticeKind {
    Alternating,
    Layered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub lattice: LatticeKind,
    pub n_per_axis: usize,
    #[serde(default = "default_edge")]
    pub edge: f64,
}

fn default_edge() -> f64 {
    6.0
}

impl GeneratorSpec {
    pub fn build(&self, n_per_axis: usize) -> SphereSystem {
        match self.lattice {
            LatticeKind::Alternating => make_alternating_lattice(n_per_axis, self.edge),
            LatticeKind::Layered => make_layered_lattice(n_per_axis, self.edge),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSource {
    /// A system JSON file; relative paths resolve against the config file.
    File(PathBuf),
    Generator(GeneratorSpec),
}

impl Default for SystemSource {
    fn default() -> Self {
        SystemSource::Generator(GeneratorSpec {
            lattice: LatticeKind::Alternating,
            n_per_axis: 3,
            edge: 6.0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Direct,
    Tree,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSpec {
    pub kind: BackendKind,
    /// Tree depth; automatic when absent.
    pub depth: Option<u32>,
    /// Tree expansion order; `2 lmax` when absent.
    pub order: Option<usize>,
}

impl BackendSpec {
    pub fn backend(&self) -> Backend {
        match self.kind {
            BackendKind::Direct => Backend::Direct,
            BackendKind::Tree => Backend::Tree {
                levels: self.depth,
                order: self.order,
            },
        }
    }

    pub fn label(&self) -> &'static str {
        match self.kind {
            BackendKind::Direct => "direct",
            BackendKind::Tree => "tree",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub lmax_sweep: Vec<usize>,
    pub reference_lmax: usize,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            lmax_sweep: (2..=10).collect(),
            reference_lmax: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NStudyConfig {
    /// Lattice sizes as spheres per axis (N = n³).
    pub n_per_axis: Vec<usize>,
    pub lmax_values: Vec<usize>,
    pub reference_lmax: usize,
}

impl Default for NStudyConfig {
    fn default() -> Self {
        Self {
            n_per_axis: vec![2, 3, 4],
            lmax_values: vec![6, 9],
            reference_lmax: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeparationConfig {
    pub separations: Vec<f64>,
    /// Radius of the second sphere; the first has radius 1.
    pub second_radii: Vec<f64>,
    pub kappa: f64,
    pub lmax: usize,
    pub reference_lmax: usize,
}

impl Default for SeparationConfig {
    fn default() -> Self {
        Self {
            separations: vec![1.0, 0.5, 0.25, 0.1, 0.05],
            second_radii: vec![1.0, 0.01],
            kappa: 100.0,
            lmax: 10,
            reference_lmax: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingConfig {
    pub n_per_axis: Vec<usize>,
    pub lmax: usize,
    pub tree_order: usize,
    pub tree_depth: Option<u32>,
    pub tolerance: f64,
    pub repeats: usize,
    /// Also time the direct backend for lattices up to this many spheres.
    pub direct_max_spheres: usize,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self {
            n_per_axis: vec![8, 12, 16],
            lmax: 6,
            tree_order: 12,
            tree_depth: None,
            tolerance: 1e-6,
            repeats: 3,
            direct_max_spheres: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSource,
    pub lmax: usize,
    pub backend: BackendSpec,
    pub solver: SolveSettings,
    pub convergence: ConvergenceConfig,
    pub nstudy: NStudyConfig,
    pub separation: SeparationConfig,
    pub scaling: ScalingConfig,
    /// Step of the energy-gradient check column in `forces`; off when absent.
    pub fd_step: Option<f64>,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            system: SystemSource::default(),
            lmax: 6,
            backend: BackendSpec::default(),
            solver: SolveSettings::with_tolerance(1e-11),
            convergence: ConvergenceConfig::default(),
            nstudy: NStudyConfig::default(),
            separation: SeparationConfig::default(),
            scaling: ScalingConfig::default(),
            fd_step: None,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    /// Parses and validates; relative system paths resolve against `base`.
    pub fn from_json(text: &str, base: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        if let (SystemSource::File(p), Some(base)) = (&mut cfg.system, base) {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_json(&text, path.parent())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if let SystemSource::File(p) = &self.system {
            if !p.exists() {
                return Err(ConfigError::MissingFile(p.clone()));
            }
        }
        if let SystemSource::Generator(g) = &self.system {
            if g.n_per_axis == 0 || !(g.edge > 0.0) {
                return invalid("generator needs n_per_axis >= 1 and a positive edge");
            }
        }
        if !(self.solver.tolerance > 0.0) || self.solver.max_iterations == 0 {
            return invalid("solver tolerance and max_iterations must be positive");
        }
        if let Some(h) = self.fd_step {
            if !(h > 0.0) {
                return invalid("fd_step must be positive");
            }
        }
        let c = &self.convergence;
        if c.lmax_sweep.is_empty() {
            return invalid("convergence.lmax_sweep is empty");
        }
        if c.lmax_sweep.iter().any(|&l| l >= c.reference_lmax) {
            return invalid("convergence.reference_lmax must exceed every swept lmax");
        }
        let n = &self.nstudy;
        if n.n_per_axis.is_empty() || n.lmax_values.is_empty() || n.n_per_axis.contains(&0) {
            return invalid("nstudy sweeps must be non-empty with positive sizes");
        }
        if n.lmax_values.iter().any(|&l| l >= n.reference_lmax) {
            return invalid("nstudy.reference_lmax must exceed every lmax value");
        }
        let s = &self.separation;
        if s.separations.is_empty() || s.second_radii.is_empty() {
            return invalid("separation sweeps are empty");
        }
        if s.separations.iter().chain(&s.second_radii).any(|v| !(*v > 0.0)) || !(s.kappa > 0.0) {
            return invalid("separations, radii and kappa must be positive");
        }
        if s.lmax >= s.reference_lmax {
            return invalid("separation.reference_lmax must exceed separation.lmax");
        }
        let sc = &self.scaling;
        if sc.n_per_axis.is_empty() || sc.n_per_axis.contains(&0) || sc.repeats == 0 {
            return invalid("scaling sweep must be non-empty with positive sizes and repeats");
        }
        if sc.tree_order < sc.lmax + 1 || !(sc.tolerance > 0.0) {
            return invalid("scaling.tree_order must be at least lmax + 1 and tolerance positive");
        }
        Ok(())
    }

    pub fn build_system(&self) -> anyhow::Result<SphereSystem> {
        Ok(match &self.system {
            SystemSource::File(p) => SphereSystem::load(p)?,
            SystemSource::Generator(g) => g.build(g.n_per_axis),
        })
    }

    pub fn generator(&self) -> Option<&GeneratorSpec> {
        match &self.system {
            SystemSource::Generator(g) => Some(g),
            SystemSource::File(_) => None,
        }
    }
}
