use num_complex::Complex64;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::blocks::{next_blocksize, sample_blocks, BlockLevel, ScheduleMode};
use super::threshold::{max_modulus, numeric_l0, shrink, support_selection_threshold};
use crate::error::{Error, Result};
use crate::linalg::{l1_norm, CMatrix, CVector};

fn default_layers() -> usize {
    15
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyperparameters {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    #[serde(default = "default_layers")]
    pub num_layers: usize,
    /// Only used by the baseline engine.
    #[serde(default = "default_true")]
    pub support_selection: bool,
}

impl Hyperparameters {
    pub fn new(c1: f64, c2: f64, c3: f64) -> Self {
        Self {
            c1,
            c2,
            c3,
            num_layers: default_layers(),
            support_selection: true,
        }
    }

    pub fn with_layers(mut self, k: usize) -> Self {
        self.num_layers = k;
        self
    }

    pub fn with_support_selection(mut self, on: bool) -> Self {
        self.support_selection = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c1 > 0.0) || !self.c1.is_finite() {
            return Err(Error::invalid(format!("c1 must be positive, got {}", self.c1)));
        }
        if !(self.c2 >= 0.0) || !self.c2.is_finite() {
            return Err(Error::invalid(format!("c2 must be non-negative, got {}", self.c2)));
        }
        if !(self.c3 > 0.0 && self.c3 < 1.0) {
            return Err(Error::invalid(format!("c3 must lie in (0, 1), got {}", self.c3)));
        }
        if self.num_layers < 1 {
            return Err(Error::invalid("num_layers must be at least 1"));
        }
        Ok(())
    }

    /// Looser check used inside single layers, which also accept the
    /// degenerate `c1 = 0`.
    fn check_layer(&self) -> Result<()> {
        if !(self.c1 >= 0.0) || !(self.c2 >= 0.0) || !(self.c3 >= 0.0) {
            return Err(Error::invalid("hyperparameters must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualMode {
    /// Residual of the whole model, kept current across block updates.
    #[default]
    Full,
    /// `g - R_i γ_i`, ignoring the other blocks.
    Blockwise,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub gamma: CVector,
    pub gamma_prev: CVector,
    pub layer: usize,
    pub blocksize: usize,
    /// `g - R γ` for the current `gamma`.
    pub residual: CVector,
    pub converged: bool,
}

impl SolverState {
    /// `γ⁰ = Rᴴ g`, with the previous iterate set equal to it.
    pub fn initial(g: &CVector, r: &CMatrix, blocksize: usize) -> Result<Self> {
        check_dims(g, r)?;
        let gamma = r.ad_mul(g);
        let residual = g - r * &gamma;
        Ok(Self {
            gamma_prev: gamma.clone(),
            gamma,
            layer: 0,
            blocksize: blocksize.max(1),
            residual,
            converged: false,
        })
    }

    pub fn from_iterate(gamma: CVector, gamma_prev: CVector, g: &CVector, r: &CMatrix) -> Result<Self> {
        check_dims(g, r)?;
        if gamma.len() != r.ncols() || gamma_prev.len() != r.ncols() {
            return Err(Error::dims("iterate length differs from dictionary width"));
        }
        let residual = g - r * &gamma;
        Ok(Self {
            gamma,
            gamma_prev,
            layer: 0,
            blocksize: 1,
            residual,
            converged: false,
        })
    }
}

fn check_dims(g: &CVector, r: &CMatrix) -> Result<()> {
    if g.len() != r.nrows() {
        return Err(Error::dims(format!(
            "measurement length {} vs dictionary rows {}",
            g.len(),
            r.nrows()
        )));
    }
    Ok(())
}

/// Support size `clamp(round(c3 · min(ln(‖R⁺g‖₁ / ‖R⁺r‖₁), L)), 0, L)`.
pub fn support_size(c3: f64, pinv_g_l1: f64, pinv_r_l1: f64, len: usize) -> usize {
    let ratio = (pinv_g_l1 / pinv_r_l1).ln();
    let v = c3 * ratio.min(len as f64);
    if !(v > 0.0) {
        return 0;
    }
    ((v + 0.5).floor() as usize).min(len)
}

/// One plain layer with support selection.
pub fn hyperlista_layer(
    state: &SolverState,
    g: &CVector,
    r: &CMatrix,
    w: &CMatrix,
    r_pinv: &CMatrix,
    hp: &Hyperparameters,
) -> Result<SolverState> {
    hp.check_layer()?;
    check_dims(g, r)?;
    if w.shape() != r.shape() || r_pinv.shape() != (r.ncols(), r.nrows()) {
        return Err(Error::dims("weights or pseudoinverse do not match the dictionary"));
    }
    let resid = g - r * &state.gamma;
    let pinv_r_l1 = l1_norm((r_pinv * &resid).iter());
    if pinv_r_l1 == 0.0 {
        let mut next = state.clone();
        next.residual = resid;
        next.converged = true;
        return Ok(next);
    }
    let theta = hp.c1 * pinv_r_l1;
    let beta = hp.c2 * numeric_l0(state.gamma.iter(), max_modulus(&state.gamma)) as f64;
    let p = if hp.support_selection {
        let pinv_g_l1 = l1_norm((r_pinv * g).iter());
        support_size(hp.c3, pinv_g_l1, pinv_r_l1, r.ncols())
    } else {
        0
    };
    let pre = &state.gamma + w.ad_mul(&resid) + (&state.gamma - &state.gamma_prev) * Complex64::new(beta, 0.0);
    let gamma = support_selection_threshold(&pre, theta, p)?;
    let residual = g - r * &gamma;
    Ok(SolverState {
        gamma_prev: state.gamma.clone(),
        gamma,
        layer: state.layer + 1,
        blocksize: state.blocksize,
        residual,
        converged: false,
    })
}

/// One blockwise layer: `J` Gauss-Seidel block updates with per-block
/// thresholds, followed by the blocksize decay.
#[allow(clippy::too_many_arguments)]
pub fn hyperlista_abt_layer(
    state: &SolverState,
    g: &CVector,
    r: &CMatrix,
    w: &CMatrix,
    level: &BlockLevel,
    mode: ScheduleMode,
    residual_mode: ResidualMode,
    hp: &Hyperparameters,
    rng: Option<&mut dyn RngCore>,
) -> Result<SolverState> {
    hp.check_layer()?;
    check_dims(g, r)?;
    if w.shape() != r.shape() {
        return Err(Error::dims("weights do not match the dictionary"));
    }
    let partition = &level.partition;
    if partition.blocksize != state.blocksize {
        return Err(Error::invalid(format!(
            "no cached block pseudoinverses for blocksize {} (level holds {})",
            state.blocksize, partition.blocksize
        )));
    }
    if partition.ranges.last().map(|x| x.end) != Some(r.ncols()) || level.pinvs.len() != partition.num_blocks() {
        return Err(Error::dims("block level does not cover the dictionary"));
    }
    let j = partition.num_blocks();
    let order: Vec<usize> = match mode {
        ScheduleMode::Sweep => (0..j).collect(),
        ScheduleMode::WeightedRandom => {
            let rng = rng.ok_or_else(|| Error::invalid("weighted_random schedule needs a random generator"))?;
            sample_blocks(&level.probabilities, j, rng)?
        }
    };

    let start = state.gamma.clone();
    let mut gamma = state.gamma.clone();
    let mut resid = state.residual.clone();
    let zero_floor = max_modulus(&start);
    for &i in &order {
        let range = partition.ranges[i].clone();
        let rb = r.columns_range(range.clone());
        let gb = gamma.rows_range(range.clone()).into_owned();
        let fit = &rb * &gb - g;
        let theta = hp.c1 * l1_norm((&level.pinvs[i] * fit).iter());
        let beta = hp.c2 * numeric_l0(gb.iter(), zero_floor) as f64;
        let drive = match residual_mode {
            ResidualMode::Full => w.columns_range(range.clone()).ad_mul(&resid),
            ResidualMode::Blockwise => w.columns_range(range.clone()).ad_mul(&(g - &rb * &gb)),
        };
        let prev = state.gamma_prev.rows_range(range.clone());
        let mut delta = CVector::zeros(range.len());
        for (k, idx) in range.clone().enumerate() {
            let x = gb[k] + drive[k] + (gb[k] - prev[k]) * beta;
            let y = shrink(x, theta);
            delta[k] = y - gb[k];
            gamma[idx] = y;
        }
        resid -= &rb * &delta;
    }
    Ok(SolverState {
        gamma_prev: start,
        gamma,
        layer: state.layer + 1,
        blocksize: next_blocksize(state.blocksize, hp.c3),
        residual: resid,
        converged: false,
    })
}
