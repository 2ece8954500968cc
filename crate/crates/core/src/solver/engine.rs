use std::sync::Arc;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::blocks::{BlockCache, BlockLevel, BlockNorm, ScheduleMode};
use super::layers::{hyperlista_abt_layer, hyperlista_layer, Hyperparameters, ResidualMode, SolverState};
use crate::error::{Error, Result};
use crate::linalg::{pseudoinverse, CMatrix, CVector};
use crate::model::{ParameterGrid, ReflectivityProfile, SteeringMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    Baseline,
    #[default]
    Abt,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbtConfig {
    pub schedule: ScheduleMode,
    pub residual_mode: ResidualMode,
    pub block_norm: BlockNorm,
    /// Overrides the half-Rayleigh-cell rule for the first blocksize.
    pub initial_blocksize: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub engine: EngineKind,
    pub abt: AbtConfig,
}

/// Elevation grid steps inside half a Rayleigh cell, times the number of
/// motion hypotheses per elevation. At least 1.
pub fn initial_blocksize(grid: &ParameterGrid, rho_s: f64) -> usize {
    let steps = match grid.elevation_step() {
        Some(step) if step > 0.0 => ((0.5 * rho_s / step) + 1e-9).floor() as usize,
        _ => 1,
    };
    steps.max(1) * grid.motion_len()
}

/// Precomputed, shareable inversion context for one dictionary and weight
/// matrix.
#[derive(Debug)]
pub struct InversionEngine {
    r: CMatrix,
    w: CMatrix,
    r_pinv: CMatrix,
    cfg: EngineConfig,
    first_blocksize: usize,
    cache: BlockCache,
}

impl InversionEngine {
    pub fn new(r: &SteeringMatrix, w: &CMatrix, rho_s: f64, cfg: EngineConfig) -> Result<Self> {
        let r = if r.normalized { r.clone() } else { r.normalized()? };
        if w.shape() != r.entries.shape() {
            return Err(Error::dims(format!(
                "weights are {:?}, dictionary is {:?}",
                w.shape(),
                r.entries.shape()
            )));
        }
        if !(rho_s > 0.0) {
            return Err(Error::invalid("Rayleigh resolution must be positive"));
        }
        let first_blocksize = match cfg.abt.initial_blocksize {
            Some(0) => return Err(Error::invalid("initial blocksize must be at least 1")),
            Some(b) => b,
            None => initial_blocksize(&r.grid, rho_s),
        };
        let r_pinv = pseudoinverse(&r.entries)?;
        Ok(Self {
            cache: BlockCache::new(r.entries.clone(), cfg.abt.block_norm),
            r: r.entries,
            w: w.clone(),
            r_pinv,
            cfg,
            first_blocksize,
        })
    }

    pub fn dictionary(&self) -> &CMatrix {
        &self.r
    }

    pub fn weights(&self) -> &CMatrix {
        &self.w
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn first_blocksize(&self) -> usize {
        self.first_blocksize
    }

    pub fn block_level(&self, blocksize: usize) -> Result<Arc<BlockLevel>> {
        self.cache.level(blocksize)
    }

    /// Run `hp.num_layers` layers from `γ⁰ = Rᴴ g`.
    pub fn run(&self, g: &CVector, hp: &Hyperparameters, mut rng: Option<&mut dyn RngCore>) -> Result<ReflectivityProfile> {
        let mut state = SolverState::initial(g, &self.r, self.first_blocksize)?;
        for _ in 0..hp.num_layers {
            state = match self.cfg.engine {
                EngineKind::Baseline => {
                    let next = hyperlista_layer(&state, g, &self.r, &self.w, &self.r_pinv, hp)?;
                    if next.converged {
                        state = next;
                        break;
                    }
                    next
                }
                EngineKind::Abt => {
                    let level = self.cache.level(state.blocksize)?;
                    hyperlista_abt_layer(
                        &state,
                        g,
                        &self.r,
                        &self.w,
                        &level,
                        self.cfg.abt.schedule,
                        self.cfg.abt.residual_mode,
                        hp,
                        rng.as_mut().map(|r| &mut **r as &mut dyn RngCore),
                    )?
                }
            };
            if state.gamma.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::numerical(format!("iterate became non-finite at layer {}", state.layer)));
            }
        }
        Ok(ReflectivityProfile::new(state.gamma))
    }
}

/// One-shot inversion; builds the engine and discards it.
pub fn run_inference(
    g: &CVector,
    r: &SteeringMatrix,
    w: &CMatrix,
    rho_s: f64,
    hp: &Hyperparameters,
    cfg: EngineConfig,
    rng: Option<&mut dyn RngCore>,
) -> Result<ReflectivityProfile> {
    InversionEngine::new(r, w, rho_s, cfg)?.run(g, hp, rng)
}
