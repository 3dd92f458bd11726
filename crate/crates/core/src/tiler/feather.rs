//! Distance-weighted stitching of overlapping tiles.
//!
//! Two overlapping images blend as `p = d_l/(d_l+d_r) * p_l + d_r/(d_l+d_r) * p_r`
//! where `d_l` and `d_r` are the distances from the pixel to the far borders
//! of the left and right image. In 2D every tile carries a separable weight
//! `ramp_x(x) * ramp_y(y)`; each ramp rises linearly from the tile edge over
//! the overlap span, and the output is `Σ w_i p_i / Σ w_i`.
//!
//! Accumulation is done relative to the first contribution at each pixel so
//! that blending equal values returns them exactly.

use thiserror::Error;

use crate::raster::{Image, CHANNELS};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StitchError {
    #[error("pixel ({x}, {y}) is not covered by any tile")]
    Uncovered { x: usize, y: usize },
    #[error("ramp of length {ramp} does not match tile side {tile}")]
    RampLength { ramp: usize, tile: usize },
}

/// Two-image feather blend.
#[inline]
pub fn feather_blend(p_l: f32, d_l: f32, p_r: f32, d_r: f32) -> f32 {
    let total = d_l + d_r;
    d_l / total * p_l + d_r / total * p_r
}

/// Per-position weights along one tile axis.
#[derive(Clone, Debug, PartialEq)]
pub struct Ramp {
    weights: Vec<f32>,
}

impl Ramp {
    /// Weights rise from the tile edge to 1 over `span` pixels, measured to
    /// pixel centres. A zero span gives flat unit weights.
    pub fn new(len: usize, span: usize) -> Self {
        let weights = (0..len)
            .map(|i| {
                if span == 0 {
                    return 1.0;
                }
                let near = (i as f32 + 0.5).min(len as f32 - i as f32 - 0.5);
                (near / span as f32).min(1.0)
            })
            .collect();
        Self { weights }
    }

    pub fn weights(&self) -> &[f32] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Weighted accumulator for tiles placed on a fixed-size output.
pub struct FeatherCanvas {
    width: usize,
    height: usize,
    base: Vec<f32>,
    delta: Vec<f32>,
    weight: Vec<f32>,
}

impl FeatherCanvas {
    pub fn new(width: usize, height: usize) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            base: vec![0.0; n * CHANNELS],
            delta: vec![0.0; n * CHANNELS],
            weight: vec![0.0; n],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Adds `tile` with its top-left corner at `(x0, y0)`, which may lie
    /// outside the canvas; the part that does not overlap is ignored.
    pub fn add(
        &mut self,
        tile: &Image,
        x0: isize,
        y0: isize,
        ramp_x: &Ramp,
        ramp_y: &Ramp,
    ) -> Result<(), StitchError> {
        if ramp_x.len() != tile.width() {
            return Err(StitchError::RampLength {
                ramp: ramp_x.len(),
                tile: tile.width(),
            });
        }
        if ramp_y.len() != tile.height() {
            return Err(StitchError::RampLength {
                ramp: ramp_y.len(),
                tile: tile.height(),
            });
        }
        let tx0 = (-x0).max(0) as usize;
        let ty0 = (-y0).max(0) as usize;
        let tx1 = ((self.width as isize - x0).min(tile.width() as isize)).max(0) as usize;
        let ty1 = ((self.height as isize - y0).min(tile.height() as isize)).max(0) as usize;
        if tx0 >= tx1 || ty0 >= ty1 {
            return Ok(());
        }
        let wx = ramp_x.weights();
        for ty in ty0..ty1 {
            let wy = ramp_y.weights()[ty];
            let cy = (y0 + ty as isize) as usize;
            let src = tile.row(ty);
            for tx in tx0..tx1 {
                let w = wx[tx] * wy;
                let cx = (x0 + tx as isize) as usize;
                let p = cy * self.width + cx;
                let s = &src[tx * CHANNELS..(tx + 1) * CHANNELS];
                let o = p * CHANNELS;
                if self.weight[p] == 0.0 {
                    self.base[o..o + CHANNELS].copy_from_slice(s);
                } else {
                    for c in 0..CHANNELS {
                        self.delta[o + c] += w * (s[c] - self.base[o + c]);
                    }
                }
                self.weight[p] += w;
            }
        }
        Ok(())
    }

    /// Accumulated raw weight per pixel.
    pub fn weight_sums(&self) -> &[f32] {
        &self.weight
    }

    pub fn finish(self) -> Result<Image, StitchError> {
        let mut out = self.base;
        for (p, &w) in self.weight.iter().enumerate() {
            if w <= 0.0 {
                return Err(StitchError::Uncovered {
                    x: p % self.width,
                    y: p / self.width,
                });
            }
            for c in 0..CHANNELS {
                let d = self.delta[p * CHANNELS + c];
                if d != 0.0 {
                    out[p * CHANNELS + c] += d / w;
                }
            }
        }
        Ok(Image::from_vec(self.width, self.height, out).expect("canvas dimensions are valid"))
    }
}
