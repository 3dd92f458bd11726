//! Block-shuffle tiling.
//!
//! A large image is reflection-padded, cut into overlapping square blocks on a
//! `w_basic` lattice, the blocks are shuffled and packed into square
//! sub-images no larger than `w_max` on a side, each sub-image is handed to
//! the transform, and the transformed blocks are trimmed, put back in grid
//! order and feathered together.
//!
//! Each stage is exposed on its own ([`expand`], [`cut`], [`shuffle`],
//! [`concatenate`], [`recut`], [`sort_blocks`], [`restore`]) and
//! [`run_pipeline`] chains them with bounded memory.

mod blocks;
pub mod feather;
mod pipeline;
mod shuffle;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::RasterError;
use crate::transforms::TransformError;

pub use blocks::{
    concatenate, cut, expand, recut, recut_subimage, restore, sort_blocks, Block, BlockView,
    Restorer, Slot, SubImageBatch, SubImagePlan,
};
pub use pipeline::{run_pipeline, PipelineRun, RunTrace, StageTiming};
pub use shuffle::{shuffle, shuffle_in_place, ShuffleRng, PRNG_NAME};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("w_basic must be at least 1")]
    ZeroBasic,
    #[error("block width {w_block} exceeds w_max {w_max}")]
    BlockTooLarge { w_block: usize, w_max: usize },
    #[error("w_padding {w_padding} must be at least trim + 1 = {}", trim + 1)]
    PaddingTooSmall { w_padding: usize, trim: usize },
    #[error("trim {trim} must be less than half the block width {w_block}")]
    TrimTooLarge { trim: usize, w_block: usize },
    #[error("worker count must be at least 1")]
    ZeroWorkers,
}

#[derive(Debug, Error)]
pub enum TilerError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error("expanded image is {width}x{height}, which matches no block grid for w_basic {w_basic}, w_padding {w_padding}")]
    GridMismatch {
        width: usize,
        height: usize,
        w_basic: usize,
        w_padding: usize,
    },
    #[error("sub-image {index} is {width}x{height}, expected a {side}x{side} square")]
    SubImageSize {
        index: usize,
        width: usize,
        height: usize,
        side: usize,
    },
    #[error("duplicate block ordinal {0}")]
    DuplicateOrdinal(usize),
    #[error("inconsistent block set: {0}")]
    InconsistentBlocks(String),
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Tiler(#[from] TilerError),
    #[error("transform failed on sub-image {index}: {source}")]
    Transform {
        index: usize,
        #[source]
        source: TransformError,
    },
    #[error("sub-image {index} has area {area}, over the budget of {budget}")]
    BudgetExceeded { index: usize, area: u64, budget: u64 },
    #[error("cannot start worker pool: {0}")]
    Workers(String),
}

impl From<ConfigError> for PipelineError {
    fn from(e: ConfigError) -> Self {
        PipelineError::Tiler(TilerError::Config(e))
    }
}

/// Block geometry and run options.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Stride of the block lattice; each block uniquely owns this many pixels per side.
    pub w_basic: usize,
    /// Context margin around the basic region.
    pub w_padding: usize,
    /// Largest square side the transform may be given.
    pub w_max: usize,
    pub seed: u64,
    /// Border removed from every transformed block.
    pub trim: usize,
    /// Apply the bilateral smoothing pass after restore.
    pub smoothing: bool,
    /// Concurrent transform calls. Does not affect the output.
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            w_basic: 16,
            w_padding: 16,
            w_max: 1000,
            seed: 0,
            trim: 8,
            smoothing: true,
            workers: 1,
        }
    }
}

impl PipelineConfig {
    #[inline]
    pub fn w_block(&self) -> usize {
        self.w_basic + 2 * self.w_padding
    }

    /// Side of a block after trimming.
    #[inline]
    pub fn trimmed_side(&self) -> usize {
        self.w_block() - 2 * self.trim
    }

    /// Width of the band shared by two neighbouring trimmed blocks.
    #[inline]
    pub fn overlap_span(&self) -> usize {
        self.trimmed_side().saturating_sub(self.w_basic)
    }

    /// Blocks per sub-image side.
    #[inline]
    pub fn grid_side(&self) -> usize {
        self.w_max / self.w_block()
    }

    /// Checks only what the cutting and packing stages need.
    pub fn validate_geometry(&self) -> Result<(), ConfigError> {
        if self.w_basic == 0 {
            return Err(ConfigError::ZeroBasic);
        }
        if self.w_block() > self.w_max {
            return Err(ConfigError::BlockTooLarge {
                w_block: self.w_block(),
                w_max: self.w_max,
            });
        }
        Ok(())
    }

    /// Full check required before running the pipeline.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.validate_geometry()?;
        if self.w_padding < self.trim + 1 {
            return Err(ConfigError::PaddingTooSmall {
                w_padding: self.w_padding,
                trim: self.trim,
            });
        }
        if 2 * self.trim >= self.w_block() {
            return Err(ConfigError::TrimTooLarge {
                trim: self.trim,
                w_block: self.w_block(),
            });
        }
        if self.workers == 0 {
            return Err(ConfigError::ZeroWorkers);
        }
        Ok(())
    }
}

/// Lattice of block windows over an expanded image.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct BlockGrid {
    pub cols: usize,
    pub rows: usize,
    pub w_basic: usize,
    pub w_padding: usize,
}

impl BlockGrid {
    /// Grid for an original image of `width` x `height`.
    pub fn new(width: usize, height: usize, cfg: &PipelineConfig) -> Self {
        Self {
            cols: width.div_ceil(cfg.w_basic),
            rows: height.div_ceil(cfg.w_basic),
            w_basic: cfg.w_basic,
            w_padding: cfg.w_padding,
        }
    }

    #[inline]
    pub fn n_total(&self) -> usize {
        self.cols * self.rows
    }

    #[inline]
    pub fn w_block(&self) -> usize {
        self.w_basic + 2 * self.w_padding
    }

    pub fn expanded_width(&self) -> usize {
        self.cols * self.w_basic + 2 * self.w_padding
    }

    pub fn expanded_height(&self) -> usize {
        self.rows * self.w_basic + 2 * self.w_padding
    }

    /// `(row, col)` of a row-major ordinal.
    #[inline]
    pub fn position(&self, ordinal: usize) -> (usize, usize) {
        (ordinal / self.cols, ordinal % self.cols)
    }

    /// Top-left corner of the window in expanded coordinates.
    #[inline]
    pub fn window_origin(&self, row: usize, col: usize) -> (usize, usize) {
        (col * self.w_basic, row * self.w_basic)
    }
}

/// Sub-image packing counts for `n_total` blocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PackingCounts {
    pub grid_side: usize,
    pub n_block: usize,
    pub n_subimg: usize,
    pub subimage_side: usize,
}

impl PackingCounts {
    pub fn new(n_total: usize, cfg: &PipelineConfig) -> Result<Self, ConfigError> {
        cfg.validate_geometry()?;
        let g = cfg.grid_side();
        let n_block = g * g;
        Ok(Self {
            grid_side: g,
            n_block,
            n_subimg: n_total.div_ceil(n_block),
            subimage_side: g * cfg.w_block(),
        })
    }
}
