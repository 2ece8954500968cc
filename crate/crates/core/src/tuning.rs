//! Coarse-to-fine grid search of `(c1, c2, c3)` by NMSE on a fixed set of
//! simulated samples.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::benchmark::{simulate_trial, trial_rng, SimulationContext, TrialConfig};
use crate::error::{Error, Result};
use crate::linalg::{hex_string, l2_norm_sqr, CVector};
use crate::model::ReflectivityProfile;
use crate::solver::{Hyperparameters, InversionEngine};

/// Mean of `‖γ̂ − γ‖² / ‖γ‖²` over paired samples.
pub fn nmse(estimates: &[ReflectivityProfile], truths: &[ReflectivityProfile]) -> Result<f64> {
    if estimates.len() != truths.len() {
        return Err(Error::dims("estimates and truths differ in count"));
    }
    if truths.is_empty() {
        return Err(Error::invalid("nmse needs at least one sample"));
    }
    let mut total = 0.0;
    for (k, (est, truth)) in estimates.iter().zip(truths).enumerate() {
        if est.len() != truth.len() {
            return Err(Error::dims(format!("sample {k}: profile lengths differ")));
        }
        let denom = l2_norm_sqr(truth.entries.iter());
        if denom == 0.0 {
            return Err(Error::invalid(format!("sample {k}: truth has zero norm")));
        }
        total += l2_norm_sqr((&est.entries - &truth.entries).iter()) / denom;
    }
    Ok(total / truths.len() as f64)
}

pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    crate::model::linspace(lo.ln(), hi.ln(), n).into_iter().map(f64::exp).collect()
}

fn default_c1() -> Vec<f64> {
    log_spaced(1e-3, 1.0, 7)
}
fn default_c2() -> Vec<f64> {
    vec![0.0, 1e-4, 1e-3, 1e-2, 1e-1]
}
fn default_c3() -> Vec<f64> {
    vec![0.3, 0.45, 0.6, 0.75, 0.9]
}
fn default_refine() -> usize {
    2
}
fn default_samples() -> usize {
    256
}
fn default_layers() -> usize {
    15
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuningConfig {
    #[serde(default = "default_c1")]
    pub c1_grid: Vec<f64>,
    #[serde(default = "default_c2")]
    pub c2_grid: Vec<f64>,
    #[serde(default = "default_c3")]
    pub c3_grid: Vec<f64>,
    /// Number of zoom levels after the coarse one.
    #[serde(default = "default_refine")]
    pub refine_factor: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    pub snr_db: f64,
    /// Scene template; its `trials` and `snr_db` are replaced by
    /// `samples` and `snr_db` above.
    pub scatterers: TrialConfig,
    pub seed: u64,
    #[serde(default = "default_layers")]
    pub num_layers: usize,
    /// Passed through to the baseline engine.
    #[serde(default = "default_true")]
    pub support_selection: bool,
}

impl TuningConfig {
    pub fn with_defaults(scatterers: TrialConfig, snr_db: f64, seed: u64) -> Self {
        Self {
            c1_grid: default_c1(),
            c2_grid: default_c2(),
            c3_grid: default_c3(),
            refine_factor: default_refine(),
            samples: default_samples(),
            snr_db,
            scatterers,
            seed,
            num_layers: default_layers(),
            support_selection: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, grid: &[f64], ok: &dyn Fn(f64) -> bool| {
            if grid.is_empty() {
                return Err(Error::invalid(format!("{name} grid is empty")));
            }
            if let Some(bad) = grid.iter().find(|&&v| !ok(v)) {
                return Err(Error::invalid(format!("{name} grid value {bad} is out of range")));
            }
            if grid.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::invalid(format!("{name} grid must be strictly increasing")));
            }
            Ok(())
        };
        check("c1", &self.c1_grid, &|v| v > 0.0 && v.is_finite())?;
        check("c2", &self.c2_grid, &|v| v >= 0.0 && v.is_finite())?;
        check("c3", &self.c3_grid, &|v| v > 0.0 && v < 1.0)?;
        if self.samples < 1 {
            return Err(Error::invalid("samples must be at least 1"));
        }
        if self.num_layers < 1 {
            return Err(Error::invalid("num_layers must be at least 1"));
        }
        self.sample_config().validate()
    }

    /// The scene template with `samples`, `snr_db` and `seed` applied.
    pub fn sample_config(&self) -> TrialConfig {
        TrialConfig {
            trials: self.samples,
            snr_db: self.snr_db,
            seed: self.seed,
            ..self.scatterers.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub level: usize,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// `None` when the candidate failed or produced a non-finite score.
    pub nmse: Option<f64>,
    pub sample_digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningResult {
    pub hyperparameters: Hyperparameters,
    pub nmse: f64,
    /// Best score after each level, coarse first.
    pub level_best: Vec<f64>,
    pub trace: Vec<CandidateRecord>,
    pub sample_digest: String,
}

/// The shared sample set: truths, measurements and its digest.
pub struct SampleSet {
    pub truths: Vec<ReflectivityProfile>,
    pub measurements: Vec<CVector>,
    pub digest: String,
    seed: u64,
}

impl SampleSet {
    pub fn generate(cfg: &TrialConfig, ctx: &SimulationContext) -> Result<Self> {
        cfg.validate()?;
        let mut truths = Vec::with_capacity(cfg.trials);
        let mut measurements = Vec::with_capacity(cfg.trials);
        for i in 0..cfg.trials {
            let trial = simulate_trial(cfg, ctx, &mut trial_rng(cfg.seed, i))?;
            truths.push(trial.truth);
            measurements.push(trial.measurement.entries);
        }
        let digest = sample_digest(&truths, &measurements);
        Ok(Self {
            truths,
            measurements,
            digest,
            seed: cfg.seed,
        })
    }

    /// Score one candidate; the same inference generators are used for every
    /// candidate so only the hyperparameters differ.
    pub fn score(&self, engine: &InversionEngine, hp: &Hyperparameters) -> Result<(f64, String)> {
        let mut estimates = Vec::with_capacity(self.truths.len());
        for (i, g) in self.measurements.iter().enumerate() {
            let mut rng = ChaCha20Rng::seed_from_u64(self.seed.wrapping_add(0x5eed));
            rng.set_stream(i as u64);
            estimates.push(engine.run(g, hp, Some(&mut rng))?);
        }
        Ok((nmse(&estimates, &self.truths)?, sample_digest(&self.truths, &self.measurements)))
    }
}

fn sample_digest(truths: &[ReflectivityProfile], measurements: &[CVector]) -> String {
    let mut h = Sha256::new();
    for z in truths.iter().flat_map(|t| t.entries.iter()).chain(measurements.iter().flat_map(|g| g.iter())) {
        h.update(z.re.to_le_bytes());
        h.update(z.im.to_le_bytes());
    }
    hex_string(&h.finalize())
}

/// Zoomed axis around `grid[best]`: same cardinality, spanning the two
/// neighbouring cells (one cell at an edge). Geometric spacing for `log`.
pub fn refine_axis(grid: &[f64], best: usize, log: bool) -> Vec<f64> {
    let n = grid.len();
    if n == 1 {
        return grid.to_vec();
    }
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(n - 1)];
    if log && lo > 0.0 {
        log_spaced(lo, hi, n)
    } else {
        crate::model::linspace(lo, hi, n)
    }
}

fn argmin(scores: &[Option<f64>]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        if let Some(v) = s {
            if best.is_none_or(|b| *v < scores[b].expect("scored")) {
                best = Some(i);
            }
        }
    }
    best
}

/// Coarse grid, then `refine_factor` zoom levels. Every level also rescores
/// the incumbent so the per-level best never increases.
pub fn grid_search(engine: &InversionEngine, ctx: &SimulationContext, cfg: &TuningConfig) -> Result<TuningResult> {
    cfg.validate()?;
    let samples = SampleSet::generate(&cfg.sample_config(), ctx)?;
    let make_hp = |c1: f64, c2: f64, c3: f64| Hyperparameters {
        c1,
        c2,
        c3,
        num_layers: cfg.num_layers,
        support_selection: cfg.support_selection,
    };

    let mut axes = [cfg.c1_grid.clone(), cfg.c2_grid.clone(), cfg.c3_grid.clone()];
    let mut trace = Vec::new();
    let mut level_best = Vec::new();
    let mut incumbent: Option<([f64; 3], f64)> = None;

    for level in 0..=cfg.refine_factor {
        let mut points: Vec<[f64; 3]> = Vec::new();
        for &c1 in &axes[0] {
            for &c2 in &axes[1] {
                for &c3 in &axes[2] {
                    points.push([c1, c2, c3]);
                }
            }
        }
        if let Some((p, _)) = incumbent {
            if !points.contains(&p) {
                points.push(p);
            }
        }
        let results: Vec<(Option<f64>, String)> = points
            .par_iter()
            .map(|p| match samples.score(engine, &make_hp(p[0], p[1], p[2])) {
                Ok((v, digest)) if v.is_finite() => (Some(v), digest),
                Ok((_, digest)) => (None, digest),
                Err(e) => {
                    log::debug!("candidate {p:?} failed: {e}");
                    (None, samples.digest.clone())
                }
            })
            .collect();
        let scores: Vec<Option<f64>> = results.iter().map(|r| r.0).collect();
        for (p, (score, digest)) in points.iter().zip(results) {
            trace.push(CandidateRecord {
                level,
                c1: p[0],
                c2: p[1],
                c3: p[2],
                nmse: score,
                sample_digest: digest,
            });
        }
        let Some(best) = argmin(&scores) else {
            if incumbent.is_none() {
                return Err(Error::numerical("every coarse candidate produced a non-finite NMSE"));
            }
            break;
        };
        let value = scores[best].expect("scored");
        if incumbent.is_none_or(|(_, v)| value < v) {
            incumbent = Some((points[best], value));
        }
        let (point, value) = incumbent.expect("set above");
        level_best.push(value);
        log::info!("level {level}: best nmse {value} at {point:?}");

        if level < cfg.refine_factor {
            for (a, axis) in axes.iter_mut().enumerate() {
                let idx = axis
                    .iter()
                    .position(|&v| v == point[a])
                    .unwrap_or_else(|| nearest_index(axis, point[a]));
                *axis = refine_axis(axis, idx, a == 0);
            }
        }
    }

    let (point, value) = incumbent.expect("at least one level scored");
    Ok(TuningResult {
        hyperparameters: make_hp(point[0], point[1], point[2]),
        nmse: value,
        level_best,
        trace,
        sample_digest: samples.digest,
    })
}

fn nearest_index(axis: &[f64], v: f64) -> usize {
    axis.iter()
        .enumerate()
        .min_by(|a, b| (a.1 - v).abs().total_cmp(&(b.1 - v).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn prof(v: &[f64]) -> ReflectivityProfile {
        ReflectivityProfile::new(CVector::from_iterator(v.len(), v.iter().map(|&x| Complex64::new(x, 0.0))))
    }

    #[test]
    fn nmse_examples() {
        let t = vec![prof(&[1.0, 0.0]), prof(&[0.0, 2.0])];
        assert_eq!(nmse(&t, &t).unwrap(), 0.0);
        let z = vec![prof(&[0.0, 0.0]), prof(&[0.0, 0.0])];
        assert_eq!(nmse(&z, &t).unwrap(), 1.0);
        // Ratios 0.25 and 0.01.
        let e = vec![prof(&[0.5, 0.0]), prof(&[0.0, 1.8])];
        assert!((nmse(&e, &t).unwrap() - 0.13).abs() < 1e-12);
        assert!(nmse(&t, &z).is_err());
    }

    #[test]
    fn default_c1_grid_is_log_spaced() {
        let g = default_c1();
        assert_eq!(g.len(), 7);
        assert!((g[0] - 1e-3).abs() < 1e-15 && (g[6] - 1.0).abs() < 1e-12);
        assert!((g[1] / g[0] - g[5] / g[4]).abs() < 1e-9);
    }

    #[test]
    fn refinement_spans_two_cells() {
        let g = vec![0.3, 0.45, 0.6, 0.75, 0.9];
        let r = refine_axis(&g, 2, false);
        assert_eq!(r.len(), 5);
        assert!((r[0] - 0.45).abs() < 1e-15 && (r[4] - 0.75).abs() < 1e-15);
        assert!((r[2] - 0.6).abs() < 1e-15);
        let edge = refine_axis(&g, 4, false);
        assert!((edge[0] - 0.75).abs() < 1e-15 && (edge[4] - 0.9).abs() < 1e-15);
        assert_eq!(refine_axis(&[0.2], 0, true), vec![0.2]);
    }

    #[test]
    fn argmin_skips_failures_and_prefers_first() {
        assert_eq!(argmin(&[None, Some(2.0), Some(1.0), Some(1.0)]), Some(2));
        assert_eq!(argmin(&[None, None]), None);
    }
}
