//! Unfolded inference: plain HyperLISTA layers and the adaptive blockwise
//! thresholding variant.

pub mod blocks;
pub mod engine;
pub mod layers;
pub mod threshold;

pub use blocks::{
    block_probabilities, block_weight, blocksize_schedule, next_blocksize, partition_blocks, sample_blocks, BlockCache,
    BlockLevel, BlockNorm, BlockPartition, BlockSchedule, ScheduleMode,
};
pub use engine::{initial_blocksize, run_inference, AbtConfig, EngineConfig, EngineKind, InversionEngine};
pub use layers::{hyperlista_abt_layer, hyperlista_layer, support_size, Hyperparameters, ResidualMode, SolverState};
pub use threshold::{complex_soft_threshold, support_selection_threshold};
