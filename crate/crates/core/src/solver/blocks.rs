//! Contiguous block partitions of the flattened grid, block sampling weights
//! and the per-blocksize cache of block pseudoinverses.

use std::collections::HashMap;
use std::ops::Range;
use std::sync::{Arc, RwLock};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{largest_eigenvalue_psd, pseudoinverse, CMatrix};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    pub blocksize: usize,
    pub ranges: Vec<Range<usize>>,
}

impl BlockPartition {
    pub fn num_blocks(&self) -> usize {
        self.ranges.len()
    }
}

/// Split `[0, len)` into consecutive ranges of `blocksize`; the last one may
/// be shorter.
pub fn partition_blocks(len: usize, blocksize: usize) -> Result<BlockPartition> {
    if blocksize < 1 {
        return Err(Error::invalid("blocksize must be at least 1"));
    }
    let ranges = (0..len)
        .step_by(blocksize)
        .map(|start| start..(start + blocksize).min(len))
        .collect();
    Ok(BlockPartition { blocksize, ranges })
}

/// Norm used for the block sampling weight `‖R_iᴴ R_i‖`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockNorm {
    #[default]
    Spectral,
    Frobenius,
}

/// Sampling weight of the columns `range` of `r`.
pub fn block_weight(r: &CMatrix, range: Range<usize>, norm: BlockNorm) -> Result<f64> {
    if range.is_empty() {
        return Err(Error::invalid("empty block"));
    }
    if range.end > r.ncols() {
        return Err(Error::invalid(format!(
            "block {range:?} exceeds {} columns",
            r.ncols()
        )));
    }
    let block = r.columns_range(range);
    let gram = block.adjoint() * block;
    match norm {
        BlockNorm::Spectral => largest_eigenvalue_psd(&gram, 1e-8),
        BlockNorm::Frobenius => Ok(gram.norm()),
    }
}

/// `P_i = L_i / Σ_j L_j`.
pub fn block_probabilities(weights: &[f64]) -> Result<Vec<f64>> {
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::invalid("block weights must be finite and non-negative"));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::invalid("block weights are all zero"));
    }
    Ok(weights.iter().map(|w| w / total).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    /// Visit every block once, in order.
    Sweep,
    /// Draw `J` block indices i.i.d. from the weight distribution.
    #[default]
    WeightedRandom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockSchedule {
    pub mode: ScheduleMode,
    pub weights: Vec<f64>,
    pub probabilities: Vec<f64>,
}

/// Everything a blockwise layer needs for one blocksize.
#[derive(Debug, Clone)]
pub struct BlockLevel {
    pub partition: BlockPartition,
    pub pinvs: Vec<CMatrix>,
    pub weights: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl BlockLevel {
    pub fn build(r: &CMatrix, blocksize: usize, norm: BlockNorm) -> Result<Self> {
        let partition = partition_blocks(r.ncols(), blocksize)?;
        let pinvs = partition
            .ranges
            .iter()
            .map(|range| pseudoinverse(&r.columns_range(range.clone()).into_owned()))
            .collect::<Result<Vec<_>>>()?;
        let weights = partition
            .ranges
            .iter()
            .map(|range| block_weight(r, range.clone(), norm))
            .collect::<Result<Vec<_>>>()?;
        let probabilities = block_probabilities(&weights)?;
        Ok(Self {
            partition,
            pinvs,
            weights,
            probabilities,
        })
    }

    pub fn schedule(&self, mode: ScheduleMode) -> BlockSchedule {
        BlockSchedule {
            mode,
            weights: self.weights.clone(),
            probabilities: self.probabilities.clone(),
        }
    }
}

/// Lazily filled, thread-safe map from blocksize to its [`BlockLevel`].
#[derive(Debug)]
pub struct BlockCache {
    dictionary: CMatrix,
    norm: BlockNorm,
    levels: RwLock<HashMap<usize, Arc<BlockLevel>>>,
}

impl BlockCache {
    pub fn new(dictionary: CMatrix, norm: BlockNorm) -> Self {
        Self {
            dictionary,
            norm,
            levels: RwLock::new(HashMap::new()),
        }
    }

    pub fn level(&self, blocksize: usize) -> Result<Arc<BlockLevel>> {
        if let Some(level) = self.levels.read().expect("cache lock").get(&blocksize) {
            return Ok(Arc::clone(level));
        }
        let built = Arc::new(BlockLevel::build(&self.dictionary, blocksize, self.norm)?);
        let mut guard = self.levels.write().expect("cache lock");
        Ok(Arc::clone(guard.entry(blocksize).or_insert(built)))
    }

    pub fn get(&self, blocksize: usize) -> Option<Arc<BlockLevel>> {
        self.levels.read().expect("cache lock").get(&blocksize).cloned()
    }
}

/// Draw `count` block indices with replacement, block `i` with
/// probability `probabilities[i]`.
pub fn sample_blocks(probabilities: &[f64], count: usize, rng: &mut dyn RngCore) -> Result<Vec<usize>> {
    let dist = WeightedIndex::new(probabilities).map_err(|e| Error::invalid(format!("block probabilities: {e}")))?;
    Ok((0..count).map(|_| dist.sample(rng)).collect())
}

/// `B_{k+1} = max(1, round(c3 · B_k))`, rounding half up.
pub fn next_blocksize(blocksize: usize, c3: f64) -> usize {
    ((c3 * blocksize as f64 + 0.5).floor() as usize).max(1)
}

pub fn blocksize_schedule(initial: usize, c3: f64, layers: usize) -> Vec<usize> {
    std::iter::successors(Some(initial.max(1)), |&b| Some(next_blocksize(b, c3)))
        .take(layers)
        .collect()
}
