//! TOML run configuration. Unknown keys are rejected and every value is
//! validated before any computation starts.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::benchmark::{distance_sweep, PostprocessConfig, SimulationContext, TrialConfig};
use crate::coherence::WeightOptConfig;
use crate::error::{Error, Result};
use crate::model::{
    build_steering_matrix, linspace, AcquisitionGeometry, MotionBasis, MotionTerm, ParameterGrid, SteeringMatrix,
};
use crate::solver::{EngineConfig, Hyperparameters};
use crate::tuning::TuningConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    /// `baseline_m,time_years` CSV; when absent a regular baseline array is
    /// generated from the fields below with all times zero.
    pub csv: Option<PathBuf>,
    pub num_baselines: usize,
    pub baseline_min: f64,
    pub baseline_max: f64,
    pub wavelength: f64,
    pub slant_range: f64,
    pub incidence_angle: Option<f64>,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            csv: None,
            num_baselines: 25,
            baseline_min: -135.0,
            baseline_max: 135.0,
            wavelength: 0.031,
            slant_range: 697_000.0,
            incidence_angle: None,
        }
    }
}

impl GeometryConfig {
    pub fn build(&self, base_dir: &Path) -> Result<AcquisitionGeometry> {
        let mut geo = match &self.csv {
            Some(path) => {
                let (b, t) = crate::io::read_geometry_csv(&base_dir.join(path))?;
                AcquisitionGeometry::new(b, t, self.wavelength, self.slant_range)?
            }
            None => AcquisitionGeometry::regular(
                self.num_baselines,
                self.baseline_min,
                self.baseline_max,
                self.wavelength,
                self.slant_range,
            )?,
        };
        geo.incidence_angle = self.incidence_angle;
        geo.validate()?;
        Ok(geo)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl AxisConfig {
    fn values(&self) -> Result<Vec<f64>> {
        if self.points < 1 || !(self.min.is_finite() && self.max.is_finite()) {
            return Err(Error::invalid("axis needs finite bounds and at least one point"));
        }
        if self.points > 1 && !(self.max > self.min) {
            return Err(Error::invalid(format!("axis max {} must exceed min {}", self.max, self.min)));
        }
        Ok(linspace(self.min, self.max, self.points))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub elevation_points: usize,
    /// Total elevation extent in Rayleigh cells, centred on zero. Ignored
    /// when explicit bounds are given.
    pub elevation_span_rayleigh: f64,
    pub elevation_min: Option<f64>,
    pub elevation_max: Option<f64>,
    /// One axis per motion term, in declaration order.
    pub motion: Vec<AxisConfig>,
}

pub const DEFAULT_SPAN_RAYLEIGH: f64 = 23.9;

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            elevation_points: 200,
            elevation_span_rayleigh: DEFAULT_SPAN_RAYLEIGH,
            elevation_min: None,
            elevation_max: None,
            motion: Vec::new(),
        }
    }
}

impl GridConfig {
    pub fn build(&self, rho_s: f64) -> Result<ParameterGrid> {
        let (lo, hi) = match (self.elevation_min, self.elevation_max) {
            (Some(lo), Some(hi)) => (lo, hi),
            (None, None) => {
                if !(self.elevation_span_rayleigh > 0.0) {
                    return Err(Error::invalid("elevation_span_rayleigh must be positive"));
                }
                let half = 0.5 * self.elevation_span_rayleigh * rho_s;
                (-half, half)
            }
            _ => return Err(Error::invalid("give both elevation_min and elevation_max or neither")),
        };
        let elevation = AxisConfig {
            min: lo,
            max: hi,
            points: self.elevation_points,
        }
        .values()?;
        let motion = self.motion.iter().map(AxisConfig::values).collect::<Result<Vec<_>>>()?;
        ParameterGrid::new(elevation, motion)
    }
}

fn default_distances() -> Vec<f64> {
    vec![0.2, 0.4, 0.6, 0.8, 1.0, 1.2]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub distances: Vec<f64>,
    pub num_scatterers: usize,
    pub amplitude_ratio: f64,
    pub phase_difference: f64,
    pub snr_db: f64,
    pub trials: usize,
    pub on_grid: bool,
    pub edge_margin: f64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            distances: default_distances(),
            num_scatterers: 2,
            amplitude_ratio: 1.0,
            phase_difference: 0.0,
            snr_db: 6.0,
            trials: 500,
            on_grid: true,
            edge_margin: 0.5,
        }
    }
}

impl BenchmarkConfig {
    pub fn template(&self, seed: u64) -> TrialConfig {
        TrialConfig {
            num_scatterers: self.num_scatterers,
            normalized_distance: self.distances.first().copied().unwrap_or(0.0),
            amplitude_ratio: self.amplitude_ratio,
            phase_difference: self.phase_difference,
            snr_db: self.snr_db,
            trials: self.trials,
            seed,
            on_grid: self.on_grid,
            edge_margin: self.edge_margin,
        }
    }

    pub fn sweep(&self, seed: u64) -> Vec<TrialConfig> {
        distance_sweep(&self.template(seed), &self.distances)
    }

    pub fn validate(&self) -> Result<()> {
        if self.distances.is_empty() {
            return Err(Error::invalid("benchmark needs at least one distance"));
        }
        self.sweep(0).iter().try_for_each(TrialConfig::validate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuningSection {
    pub c1_grid: Vec<f64>,
    pub c2_grid: Vec<f64>,
    pub c3_grid: Vec<f64>,
    pub refine_factor: usize,
    pub samples: usize,
    pub snr_db: f64,
    pub num_scatterers: usize,
    pub normalized_distance: f64,
    pub amplitude_ratio: f64,
    pub phase_difference: f64,
    pub on_grid: bool,
    pub edge_margin: f64,
}

impl Default for TuningSection {
    fn default() -> Self {
        let t = TuningConfig::with_defaults(BenchmarkConfig::default().template(0), 6.0, 0);
        Self {
            c1_grid: t.c1_grid,
            c2_grid: t.c2_grid,
            c3_grid: t.c3_grid,
            refine_factor: t.refine_factor,
            samples: t.samples,
            snr_db: 6.0,
            num_scatterers: 2,
            normalized_distance: 1.0,
            amplitude_ratio: 1.0,
            phase_difference: 0.0,
            on_grid: true,
            edge_margin: 0.5,
        }
    }
}

impl TuningSection {
    pub fn to_config(&self, seed: u64, hp: &Hyperparameters) -> TuningConfig {
        TuningConfig {
            c1_grid: self.c1_grid.clone(),
            c2_grid: self.c2_grid.clone(),
            c3_grid: self.c3_grid.clone(),
            refine_factor: self.refine_factor,
            samples: self.samples,
            snr_db: self.snr_db,
            scatterers: TrialConfig {
                num_scatterers: self.num_scatterers,
                normalized_distance: self.normalized_distance,
                amplitude_ratio: self.amplitude_ratio,
                phase_difference: self.phase_difference,
                snr_db: self.snr_db,
                trials: self.samples,
                seed,
                on_grid: self.on_grid,
                edge_margin: self.edge_margin,
            },
            seed,
            num_layers: hp.num_layers,
            support_selection: hp.support_selection,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from(".") }
    }
}

/// Hyperparameters used when the configuration gives none.
pub fn default_hyperparameters() -> Hyperparameters {
    Hyperparameters::new(0.4, 0.0, 0.5)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub threads: Option<usize>,
    pub geometry: GeometryConfig,
    pub basis: Vec<MotionTerm>,
    pub grid: GridConfig,
    pub weights: WeightOptConfig,
    pub engine: EngineConfig,
    pub hyperparameters: Hyperparameters,
    pub postprocess: PostprocessConfig,
    pub benchmark: BenchmarkConfig,
    pub tuning: TuningSection,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            threads: None,
            geometry: GeometryConfig::default(),
            basis: Vec::new(),
            grid: GridConfig::default(),
            weights: WeightOptConfig::default(),
            engine: EngineConfig::default(),
            hyperparameters: default_hyperparameters(),
            postprocess: PostprocessConfig::default(),
            benchmark: BenchmarkConfig::default(),
            tuning: TuningSection::default(),
            output: OutputConfig::default(),
        }
    }
}

/// The assembled forward model of a run.
#[derive(Debug, Clone)]
pub struct Model {
    pub geometry: AcquisitionGeometry,
    pub basis: MotionBasis,
    pub dictionary: SteeringMatrix,
    pub rho_s: f64,
}

impl Model {
    pub fn context(&self) -> Result<SimulationContext> {
        SimulationContext::new(self.geometry.clone(), self.basis.clone(), self.dictionary.clone())
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::invalid(format!("{}: {e}", origin.display())))?;
        if let Some(csv) = &cfg.geometry.csv {
            if csv.is_relative() {
                let base = origin.parent().unwrap_or(Path::new("."));
                cfg.geometry.csv = Some(base.join(csv));
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        if self.threads == Some(0) {
            return Err(Error::invalid("threads must be at least 1"));
        }
        self.weights.validate()?;
        self.hyperparameters.validate()?;
        self.postprocess.validate()?;
        self.benchmark.validate()?;
        self.tuning.to_config(self.seed, &self.hyperparameters).validate()?;
        if let Some(b) = self.engine.abt.initial_blocksize {
            if b < 1 {
                return Err(Error::invalid("initial_blocksize must be at least 1"));
            }
        }
        if self.grid.motion.len() != self.basis.len() {
            return Err(Error::invalid(format!(
                "{} motion axes configured for {} basis terms",
                self.grid.motion.len(),
                self.basis.len()
            )));
        }
        Ok(())
    }

    /// Geometry, basis, grid and the column-normalized dictionary.
    pub fn build_model(&self) -> Result<Model> {
        self.validate()?;
        let geometry = self.geometry.build(Path::new("."))?;
        let basis = MotionBasis::new(self.basis.clone());
        basis.validate(&geometry)?;
        let rho_s = geometry.rayleigh_resolution()?;
        let grid = self.grid.build(rho_s)?;
        let dictionary = build_steering_matrix(&geometry, &basis, &grid, true)?;
        Ok(Model {
            geometry,
            basis,
            dictionary,
            rho_s,
        })
    }
}
