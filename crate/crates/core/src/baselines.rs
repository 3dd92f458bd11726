//! Reference tiling strategies that block shuffle is compared against.
//!
//! * [`whole`] transforms the full image in one call. It ignores any pixel
//!   budget and serves as the quality oracle.
//! * [`naive_tiles`] partitions the image into independent tiles and pastes
//!   the results side by side.
//! * [`feather_tiles`] transforms overlapping tiles and stitches them with the
//!   same feathering canvas used by the block-shuffle restore stage.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{crop, Image, RasterError, Rect};
use crate::tiler::feather::{FeatherCanvas, Ramp};
use crate::transforms::{apply_checked, Transform, TransformError};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("invalid tile config: {0}")]
    Config(String),
    #[error("transform failed on tile {index}: {source}")]
    Transform {
        index: usize,
        #[source]
        source: TransformError,
    },
    #[error(transparent)]
    Raster(#[from] RasterError),
}

/// Tile side and feathering overlap.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileConfig {
    pub tile: usize,
    pub overlap: usize,
}

impl Default for TileConfig {
    fn default() -> Self {
        Self {
            tile: 1000,
            overlap: 128,
        }
    }
}

impl TileConfig {
    /// Checks the tile against a budget side and, for feathering, the overlap.
    pub fn validate(&self, w_max: Option<usize>, feathered: bool) -> Result<(), BaselineError> {
        if self.tile == 0 {
            return Err(BaselineError::Config("tile must be positive".into()));
        }
        if let Some(w_max) = w_max {
            if self.tile > w_max {
                return Err(BaselineError::Config(format!(
                    "tile {} exceeds w_max {w_max}",
                    self.tile
                )));
            }
        }
        if feathered && (self.overlap == 0 || self.overlap >= self.tile) {
            return Err(BaselineError::Config(format!(
                "overlap {} must satisfy 0 < overlap < tile {}",
                self.overlap, self.tile
            )));
        }
        Ok(())
    }
}

pub fn whole<T: Transform + ?Sized>(image: &Image, transform: &T) -> Result<Image, BaselineError> {
    apply_checked(transform, image).map_err(|source| BaselineError::Transform { index: 0, source })
}

/// Tile origins along one axis for a partition into `tile`-sized cells;
/// the last cell may be smaller.
pub fn partition_starts(len: usize, tile: usize) -> Vec<usize> {
    (0..len).step_by(tile).collect()
}

/// Origins of overlapping tiles on stride `tile - overlap`. The last tile is
/// pulled back to end exactly at `len` so every tile is full size.
pub fn overlapping_starts(len: usize, tile: usize, overlap: usize) -> Vec<usize> {
    if len <= tile {
        return vec![0];
    }
    let stride = tile - overlap;
    let mut starts: Vec<usize> = (0..).map(|i| i * stride).take_while(|s| s + tile < len).collect();
    starts.push(len - tile);
    starts.dedup();
    starts
}

pub fn naive_tiles<T: Transform + ?Sized>(
    image: &Image,
    transform: &T,
    cfg: &TileConfig,
) -> Result<Image, BaselineError> {
    cfg.validate(None, false)?;
    let mut out = Image::new(image.width(), image.height())?;
    let xs = partition_starts(image.width(), cfg.tile);
    let ys = partition_starts(image.height(), cfg.tile);
    for (j, &y0) in ys.iter().enumerate() {
        for (i, &x0) in xs.iter().enumerate() {
            let rect = Rect::new(
                x0,
                y0,
                cfg.tile.min(image.width() - x0),
                cfg.tile.min(image.height() - y0),
            );
            let tile = crop(image, rect)?;
            let styled = apply_checked(transform, &tile).map_err(|source| BaselineError::Transform {
                index: j * xs.len() + i,
                source,
            })?;
            out.paste(&styled, x0, y0)?;
        }
    }
    Ok(out)
}

pub fn feather_tiles<T: Transform + ?Sized>(
    image: &Image,
    transform: &T,
    cfg: &TileConfig,
) -> Result<Image, BaselineError> {
    cfg.validate(None, true)?;
    let xs = overlapping_starts(image.width(), cfg.tile, cfg.overlap);
    let ys = overlapping_starts(image.height(), cfg.tile, cfg.overlap);
    let tw = cfg.tile.min(image.width());
    let th = cfg.tile.min(image.height());
    let ramp_x = Ramp::new(tw, cfg.overlap);
    let ramp_y = Ramp::new(th, cfg.overlap);
    let mut canvas = FeatherCanvas::new(image.width(), image.height());
    for (j, &y0) in ys.iter().enumerate() {
        for (i, &x0) in xs.iter().enumerate() {
            let tile = crop(image, Rect::new(x0, y0, tw, th))?;
            let styled = apply_checked(transform, &tile).map_err(|source| BaselineError::Transform {
                index: j * xs.len() + i,
                source,
            })?;
            canvas
                .add(&styled, x0 as isize, y0 as isize, &ramp_x, &ramp_y)
                .map_err(|e| BaselineError::Config(e.to_string()))?;
        }
    }
    canvas.finish().map_err(|e| BaselineError::Config(e.to_string()))
}
