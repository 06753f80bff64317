//! Experiment configuration read from TOML.
//!
//! Every section and key is optional; missing values take the defaults below.
//! Unknown keys are rejected so that typos do not silently fall back to a
//! default.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::CliError;

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub case: CaseConfig,
    pub map: MapConfig,
    pub solver: SolverConfig,
    pub perturbation: PerturbationConfig,
    pub spectrum: SpectrumConfig,
    pub bound_study: BoundStudyConfig,
    pub uniqueness: UniquenessConfig,
    pub output: OutputConfig,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseKind {
    #[default]
    FlatTorus,
    ProductSphere,
    MappingTorus,
    Sphere,
}

impl CaseKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::FlatTorus => "flat_torus",
            Self::ProductSphere => "product_sphere",
            Self::MappingTorus => "mapping_torus",
            Self::Sphere => "sphere",
        }
    }

    pub fn sphere_target(self) -> bool {
        matches!(self, Self::ProductSphere | Self::Sphere)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FiberKind {
    Kuhn,
    #[default]
    Crossed,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gluing {
    Identity,
    #[default]
    QuarterTurn,
    Matrix,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CaseConfig {
    pub kind: CaseKind,
    /// flat_torus: side lengths, one per dimension.
    pub periods: Vec<f64>,
    pub resolution: Vec<usize>,
    /// product_sphere: length and segment count of the circle factor.
    pub circle_length: f64,
    pub segments: usize,
    /// product_sphere and sphere: icosphere refinement level.
    pub subdivisions: usize,
    /// mapping_torus: square fiber torus and its gluing.
    pub fiber: FiberKind,
    pub fiber_resolution: usize,
    pub fiber_periods: [f64; 2],
    pub gluing: Gluing,
    pub gluing_matrix: [[i64; 2]; 2],
    pub layers: usize,
}

impl Default for CaseConfig {
    fn default() -> Self {
        Self {
            kind: CaseKind::FlatTorus,
            periods: vec![1.0; 3],
            resolution: vec![12; 3],
            circle_length: 2.0 * PI,
            segments: 64,
            subdivisions: 3,
            fiber: FiberKind::Crossed,
            fiber_resolution: 8,
            fiber_periods: [1.0, 1.0],
            gluing: Gluing::QuarterTurn,
            gluing_matrix: [[1, 0], [0, 1]],
            layers: 12,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    #[default]
    Linear,
    Random,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MapConfig {
    /// Winding numbers along the periodic generators. Defaults to one turn
    /// along the first generator.
    pub winding: Option<Vec<i64>>,
    pub init: InitKind,
    /// Sup-norm of the random vertex potential for `init = "random"`.
    pub init_amplitude: f64,
    /// Projected descent steps applied to sphere-valued maps.
    pub descent_steps: usize,
    pub step_size: f64,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self {
            winding: None,
            init: InitKind::Linear,
            init_amplitude: 1.0,
            descent_steps: 0,
            step_size: 1e-2,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol: f64,
    pub eps_start: f64,
    pub eps_end: f64,
    pub eps_factor: f64,
    pub max_iter: usize,
    pub memory: usize,
    pub density_threshold: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            eps_start: 1e-1,
            eps_end: 1e-6,
            eps_factor: 10.0,
            max_iter: 5000,
            memory: 10,
            density_threshold: 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationMode {
    #[default]
    Conformal,
    General,
}

impl PerturbationMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Conformal => "conformal",
            Self::General => "general",
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbationConfig {
    pub mode: PerturbationMode,
    pub amplitudes: Vec<f64>,
    /// Highest Fourier mode per periodic axis.
    pub frequency: usize,
    /// Number of seeds per amplitude; seed `i` is `seed + i`.
    pub seeds: usize,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        Self {
            mode: PerturbationMode::Conformal,
            amplitudes: vec![0.01, 0.02, 0.05],
            frequency: 2,
            seeds: 10,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumConfig {
    /// Number of eigenpairs; 0 disables the gap check in pipeline and sweeps.
    pub count: usize,
    pub cluster_tol: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            count: 10,
            cluster_tol: 0.05,
            tol: 1e-10,
            max_iter: 2000,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundStudyConfig {
    pub levels: Vec<usize>,
    /// Random degree-one maps evaluated per level.
    pub perturbations: usize,
    pub amplitude: f64,
}

impl Default for BoundStudyConfig {
    fn default() -> Self {
        Self {
            levels: vec![1, 2, 3],
            perturbations: 20,
            amplitude: 0.1,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UniquenessConfig {
    pub starts: usize,
    pub amplitude: f64,
    pub tol: f64,
    /// Amplitude of a metric perturbation (mode and frequency from
    /// `[perturbation]`) applied before the multistart.
    pub metric_amplitude: f64,
    /// Per-start windings, cycled; defaults to `map.winding` for all.
    pub windings: Option<Vec<Vec<i64>>>,
}

impl Default for UniquenessConfig {
    fn default() -> Self {
        Self {
            starts: 5,
            amplitude: 1.0,
            tol: 1e-11,
            metric_amplitude: 0.0,
            windings: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Usage(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let usage = |m: String| Err(CliError::Usage(m));
        let c = &self.case;
        if c.kind == CaseKind::FlatTorus && c.periods.len() != c.resolution.len() {
            return usage(format!(
                "case.periods has {} entries but case.resolution has {}",
                c.periods.len(),
                c.resolution.len()
            ));
        }
        let p = &self.perturbation;
        if p.amplitudes.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
            return usage("perturbation.amplitudes must be finite and nonnegative".into());
        }
        if p.amplitudes.windows(2).any(|w| w[0] > w[1]) {
            return usage("perturbation.amplitudes must be sorted ascending".into());
        }
        if self.bound_study.levels.is_empty() {
            return usage("bound_study.levels is empty".into());
        }
        if self.uniqueness.starts < 2 {
            return usage("uniqueness.starts must be at least 2".into());
        }
        if matches!(&self.uniqueness.windings, Some(w) if w.is_empty()) {
            return usage("uniqueness.windings is empty".into());
        }
        let s = &self.solver;
        if !(s.tol > 0.0)
            || !(s.eps_end > 0.0)
            || !(s.eps_start >= s.eps_end)
            || !(s.eps_factor > 1.0)
        {
            return usage(
                "solver tolerances must be positive with eps_start >= eps_end and eps_factor > 1"
                    .into(),
            );
        }
        if !(self.spectrum.cluster_tol >= 0.0) {
            return usage("spectrum.cluster_tol must be nonnegative".into());
        }
        Ok(())
    }
}
