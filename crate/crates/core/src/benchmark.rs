//! Monte Carlo simulation of layover scenes and effective-detection-rate
//! evaluation.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CVector;
use crate::model::{
    add_noise, steering_vector, AcquisitionGeometry, MeasurementVector, MotionBasis, ReflectivityProfile,
    SteeringMatrix,
};
use crate::solver::{Hyperparameters, InversionEngine};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScattererSpec {
    pub elevation: f64,
    pub motion_coeffs: Vec<f64>,
    pub amplitude: f64,
    pub phase: f64,
}

fn default_ratio() -> f64 {
    1.0
}

fn default_margin() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialConfig {
    pub num_scatterers: usize,
    /// Elevation offset of the second scatterer, in Rayleigh cells.
    #[serde(default)]
    pub normalized_distance: f64,
    #[serde(default = "default_ratio")]
    pub amplitude_ratio: f64,
    #[serde(default)]
    pub phase_difference: f64,
    pub snr_db: f64,
    pub trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub on_grid: bool,
    /// Keep-out zone at both ends of the elevation axis, in Rayleigh cells.
    #[serde(default = "default_margin")]
    pub edge_margin: f64,
}

impl TrialConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.num_scatterers) {
            return Err(Error::invalid("num_scatterers must be 1 or 2"));
        }
        if self.trials < 1 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if self.num_scatterers == 2 && !(self.normalized_distance > 0.0) {
            return Err(Error::invalid("normalized_distance must be positive for two scatterers"));
        }
        if !(self.amplitude_ratio >= 1.0) || !self.amplitude_ratio.is_finite() {
            return Err(Error::invalid("amplitude_ratio must be finite and at least 1"));
        }
        if !self.phase_difference.is_finite() || !(self.edge_margin >= 0.0) {
            return Err(Error::invalid("phase_difference must be finite and edge_margin non-negative"));
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(Error::invalid("snr_db must be a number or +inf"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionTolerance {
    pub fraction_of_rayleigh: f64,
}

impl Default for DetectionTolerance {
    fn default() -> Self {
        Self {
            fraction_of_rayleigh: 0.25,
        }
    }
}

/// Post-processing of an inverted profile before detection scoring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PostprocessConfig {
    pub kappa: f64,
    pub k_max: usize,
    pub min_separation: usize,
    pub tolerance: DetectionTolerance,
}

impl Default for PostprocessConfig {
    fn default() -> Self {
        Self {
            kappa: 0.05,
            k_max: 2,
            min_separation: 2,
            tolerance: DetectionTolerance::default(),
        }
    }
}

impl PostprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.kappa) {
            return Err(Error::invalid(format!("kappa must lie in [0, 1), got {}", self.kappa)));
        }
        if self.k_max < 1 {
            return Err(Error::invalid("k_max must be at least 1"));
        }
        if !(self.tolerance.fraction_of_rayleigh > 0.0) {
            return Err(Error::invalid("detection tolerance must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub normalized_distance: f64,
    pub snr_db: f64,
    pub amplitude_ratio: f64,
    pub trials: usize,
    pub effective_detections: usize,
    pub rate: f64,
}

/// Everything needed to synthesize a scene on the inversion grid.
#[derive(Debug, Clone)]
pub struct SimulationContext {
    pub geometry: AcquisitionGeometry,
    pub basis: MotionBasis,
    /// Column-normalized inversion dictionary.
    pub dictionary: SteeringMatrix,
    pub rho_s: f64,
}

impl SimulationContext {
    pub fn new(geometry: AcquisitionGeometry, basis: MotionBasis, dictionary: SteeringMatrix) -> Result<Self> {
        let dictionary = if dictionary.normalized {
            dictionary
        } else {
            dictionary.normalized()?
        };
        let rho_s = geometry.rayleigh_resolution()?;
        Ok(Self {
            geometry,
            basis,
            dictionary,
            rho_s,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Trial {
    pub truth: ReflectivityProfile,
    pub scatterers: Vec<ScattererSpec>,
    pub measurement: MeasurementVector,
}

/// Draw one scene: the first scatterer uniformly inside the elevation axis,
/// the second `normalized_distance` Rayleigh cells above it.
pub fn simulate_trial<R: Rng + ?Sized>(cfg: &TrialConfig, ctx: &SimulationContext, rng: &mut R) -> Result<Trial> {
    cfg.validate()?;
    let grid = &ctx.dictionary.grid;
    let elev = &grid.elevation;
    let (lo, hi) = (elev[0], elev[elev.len() - 1]);
    let offset = if cfg.num_scatterers == 2 {
        cfg.normalized_distance * ctx.rho_s
    } else {
        0.0
    };
    let margin = cfg.edge_margin * ctx.rho_s;
    let first_max = hi - margin - offset;
    let first_min = lo + margin;
    if first_max < first_min {
        return Err(Error::invalid(format!(
            "second scatterer at +{offset:.3} m does not fit on the elevation axis [{lo:.3}, {hi:.3}]"
        )));
    }
    let s1 = rng.random_range(first_min..=first_max);
    let phase = rng.random_range(0.0..TAU);
    let mut motion: Vec<Vec<f64>> = Vec::with_capacity(cfg.num_scatterers);
    for _ in 0..cfg.num_scatterers {
        let coeffs = grid
            .motion
            .iter()
            .map(|axis| {
                if cfg.on_grid {
                    axis[rng.random_range(0..axis.len())]
                } else {
                    rng.random_range(axis[0]..=axis[axis.len() - 1])
                }
            })
            .collect();
        motion.push(coeffs);
    }

    let mut scatterers = Vec::with_capacity(cfg.num_scatterers);
    for (k, coeffs) in motion.into_iter().enumerate() {
        let mut s = s1 + k as f64 * offset;
        if cfg.on_grid {
            s = elev[grid.nearest_elevation(s)];
        }
        scatterers.push(ScattererSpec {
            elevation: s,
            motion_coeffs: coeffs,
            amplitude: if k == 0 { 1.0 } else { 1.0 / cfg.amplitude_ratio },
            phase: phase + k as f64 * cfg.phase_difference,
        });
    }
    if cfg.on_grid && scatterers.len() == 2 && scatterers[0].elevation == scatterers[1].elevation {
        return Err(Error::invalid("both scatterers snap to the same elevation cell"));
    }

    let n = ctx.geometry.len();
    let mut truth = CVector::zeros(grid.len());
    let mut signal = CVector::zeros(n);
    let scale = 1.0 / (n as f64).sqrt();
    for sc in &scatterers {
        let value = Complex64::from_polar(sc.amplitude, sc.phase);
        let mut multi = vec![grid.nearest_elevation(sc.elevation)];
        multi.extend(sc.motion_coeffs.iter().enumerate().map(|(a, &p)| grid.nearest_motion(a, p)));
        truth[grid.flat_index(&multi)?] += value;
        if cfg.on_grid {
            signal += ctx.dictionary.entries.column(grid.flat_index(&multi)?) * value;
        } else {
            let atom = steering_vector(&ctx.geometry, &ctx.basis, sc.elevation, &sc.motion_coeffs)?;
            signal += atom * (value * scale);
        }
    }
    let measurement = add_noise(signal, cfg.snr_db, rng)?;
    Ok(Trial {
        truth: ReflectivityProfile::new(truth),
        scatterers,
        measurement,
    })
}

/// Zero every entry whose modulus is below `kappa` times the largest one.
pub fn cleanup_profile(gamma: &ReflectivityProfile, kappa: f64) -> Result<ReflectivityProfile> {
    if !(0.0..1.0).contains(&kappa) {
        return Err(Error::invalid(format!("kappa must lie in [0, 1), got {kappa}")));
    }
    let peak = gamma.entries.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let floor = kappa * peak;
    Ok(ReflectivityProfile::new(gamma.entries.map(|z| {
        if z.norm() < floor {
            Complex64::new(0.0, 0.0)
        } else {
            z
        }
    })))
}

/// Peak picking on the elevation projection of `|γ|`: local maxima, kept
/// strongest first while at least `min_separation` grid steps apart.
pub fn model_order_selection(
    cleaned: &ReflectivityProfile,
    grid: &crate::model::ParameterGrid,
    k_max: usize,
    min_separation: usize,
) -> Result<Vec<ScattererSpec>> {
    if k_max < 1 {
        return Err(Error::invalid("k_max must be at least 1"));
    }
    if cleaned.len() != grid.len() {
        return Err(Error::dims("profile length differs from grid size"));
    }
    let per = grid.motion_len();
    let ls = grid.elevation.len();
    let mut proj = vec![(0.0_f64, 0usize); ls];
    for (s, slot) in proj.iter_mut().enumerate() {
        for m in 0..per {
            let idx = s * per + m;
            let v = cleaned.entries[idx].norm();
            if v > slot.0 {
                *slot = (v, idx);
            }
        }
    }
    let mut peaks: Vec<usize> = (0..ls)
        .filter(|&s| {
            let v = proj[s].0;
            v > 0.0 && (s == 0 || v >= proj[s - 1].0) && (s + 1 == ls || v >= proj[s + 1].0)
        })
        .collect();
    peaks.sort_by(|&a, &b| proj[b].0.total_cmp(&proj[a].0).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for s in peaks {
        if kept.len() == k_max {
            break;
        }
        if kept.iter().all(|&k| k.abs_diff(s) >= min_separation) {
            kept.push(s);
        }
    }
    kept.into_iter()
        .map(|s| {
            let idx = proj[s].1;
            let (elevation, motion_coeffs) = grid.coordinates(idx)?;
            let z = cleaned.entries[idx];
            Ok(ScattererSpec {
                elevation,
                motion_coeffs,
                amplitude: z.norm(),
                phase: z.arg(),
            })
        })
        .collect()
}

/// Count equality plus greedy nearest-first elevation matching within
/// `tol * rho_s`.
pub fn is_effective(detected: &[ScattererSpec], truth: &[ScattererSpec], tol: &DetectionTolerance, rho_s: f64) -> bool {
    if detected.len() != truth.len() {
        return false;
    }
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(detected.len() * truth.len());
    for (i, d) in detected.iter().enumerate() {
        for (j, t) in truth.iter().enumerate() {
            pairs.push(((d.elevation - t.elevation).abs(), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let limit = tol.fraction_of_rayleigh * rho_s;
    let mut used_d = vec![false; detected.len()];
    let mut used_t = vec![false; truth.len()];
    for (err, i, j) in pairs {
        if used_d[i] || used_t[j] {
            continue;
        }
        if err > limit {
            return false;
        }
        used_d[i] = true;
        used_t[j] = true;
    }
    true
}

pub fn effective_detection_rate(
    detections: &[Vec<ScattererSpec>],
    truths: &[Vec<ScattererSpec>],
    tol: &DetectionTolerance,
    rho_s: f64,
) -> Result<f64> {
    if !(tol.fraction_of_rayleigh > 0.0) {
        return Err(Error::invalid("detection tolerance must be positive"));
    }
    if detections.len() != truths.len() {
        return Err(Error::dims("detections and truths cover different trial counts"));
    }
    if detections.is_empty() {
        return Err(Error::invalid("no trials to score"));
    }
    let hits = detections
        .iter()
        .zip(truths)
        .filter(|(d, t)| is_effective(d, t, tol, rho_s))
        .count();
    Ok(hits as f64 / detections.len() as f64)
}

/// Random generator for trial `index` of a configuration seeded by `seed`.
pub fn trial_rng(seed: u64, index: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn run_trial(
    cfg: &TrialConfig,
    index: usize,
    ctx: &SimulationContext,
    engine: &InversionEngine,
    hp: &Hyperparameters,
    post: &PostprocessConfig,
) -> Result<bool> {
    let mut rng = trial_rng(cfg.seed, index);
    let trial = simulate_trial(cfg, ctx, &mut rng)?;
    let estimate = engine.run(&trial.measurement.entries, hp, Some(&mut rng))?;
    let cleaned = cleanup_profile(&estimate, post.kappa)?;
    let detected = model_order_selection(&cleaned, &ctx.dictionary.grid, post.k_max, post.min_separation)?;
    Ok(is_effective(&detected, &trial.scatterers, &post.tolerance, ctx.rho_s))
}

/// Evaluate every configuration of a sweep. Trials run in parallel; each
/// owns a generator derived from `(seed, trial index)`.
pub fn run_benchmark(
    sweep: &[TrialConfig],
    ctx: &SimulationContext,
    engine: &InversionEngine,
    hp: &Hyperparameters,
    post: &PostprocessConfig,
) -> Result<Vec<CurvePoint>> {
    post.validate()?;
    for cfg in sweep {
        cfg.validate()?;
    }
    sweep
        .iter()
        .map(|cfg| {
            let effective = (0..cfg.trials)
                .into_par_iter()
                .map(|i| match run_trial(cfg, i, ctx, engine, hp, post) {
                    Ok(hit) => usize::from(hit),
                    Err(e) => {
                        log::warn!("trial {i} at distance {} failed: {e}", cfg.normalized_distance);
                        0
                    }
                })
                .sum::<usize>();
            Ok(CurvePoint {
                normalized_distance: cfg.normalized_distance,
                snr_db: cfg.snr_db,
                amplitude_ratio: cfg.amplitude_ratio,
                trials: cfg.trials,
                effective_detections: effective,
                rate: effective as f64 / cfg.trials as f64,
            })
        })
        .collect()
}

/// Build the standard distance sweep around a template configuration.
pub fn distance_sweep(template: &TrialConfig, distances: &[f64]) -> Vec<TrialConfig> {
    distances
        .iter()
        .map(|&d| TrialConfig {
            normalized_distance: d,
            ..template.clone()
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub input_digests: BTreeMap<String, String>,
    pub dictionary_digest: String,
    pub weights_digest: String,
    pub elapsed_seconds: f64,
}
