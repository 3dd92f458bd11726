//! Edge-preserving bilateral smoothing used as the final clean-up pass.
//!
//! Each channel is filtered independently over a square window with
//! reflect-101 borders:
//!
//! `out(p) = Σ_q Gs(|p - q|) Gc(|I(p) - I(q)|) I(q) / Σ_q Gs Gc`
//!
//! The spatial Gaussian is truncated at `ceil(2 * sigma_space)`.

use rayon::prelude::*;
use thiserror::Error;

use crate::raster::{reflect_101, Image, CHANNELS};

/// Number of passes in [`smooth`].
pub const SMOOTH_PASSES: usize = 4;
/// Colour and spatial sigma of each [`smooth`] pass.
pub const SMOOTH_SIGMA: f32 = 10.0;
/// Sigma of the single wide pass that [`smooth`] stands in for.
pub const LARGE_SIGMA: f32 = 40.0;

#[derive(Debug, Error, PartialEq)]
pub enum SmoothingError {
    #[error("bilateral parameters must be positive: sigma_color {sigma_color}, sigma_space {sigma_space}, radius {radius}")]
    InvalidParams {
        sigma_color: f32,
        sigma_space: f32,
        radius: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BilateralParams {
    pub sigma_color: f32,
    pub sigma_space: f32,
    pub radius: usize,
}

impl BilateralParams {
    /// Radius defaults to `ceil(2 * sigma_space)`.
    pub fn new(sigma_color: f32, sigma_space: f32) -> Result<Self, SmoothingError> {
        let radius = if sigma_space.is_finite() && sigma_space > 0.0 {
            (2.0 * sigma_space).ceil() as usize
        } else {
            0
        };
        Self::with_radius(sigma_color, sigma_space, radius)
    }

    pub fn with_radius(sigma_color: f32, sigma_space: f32, radius: usize) -> Result<Self, SmoothingError> {
        let ok = sigma_color.is_finite()
            && sigma_color > 0.0
            && sigma_space.is_finite()
            && sigma_space > 0.0
            && radius >= 1;
        if !ok {
            return Err(SmoothingError::InvalidParams {
                sigma_color,
                sigma_space,
                radius,
            });
        }
        Ok(Self {
            sigma_color,
            sigma_space,
            radius,
        })
    }
}

/// `exp(x)` for `x <= 0`, relative error within `1.5e-7 * (1 + |x|)`.
///
/// Branch-free so the per-row loops vectorize; arguments below -87 flush to
/// about 1e-38.
#[inline(always)]
fn exp_neg(x: f32) -> f32 {
    // adding 1.5 * 2^23 rounds to an integer held in the low mantissa bits
    const MAGIC: f32 = 12_582_912.0;
    let t = x.max(-87.0) * std::f32::consts::LOG2_E;
    let r = t + MAGIC;
    let y = (t - (r - MAGIC)) * std::f32::consts::LN_2;
    let p = 1.0
        + y * (1.0 + y * (0.5 + y * (1.0 / 6.0 + y * (1.0 / 24.0 + y * (1.0 / 120.0 + y * (1.0 / 720.0))))));
    f32::from_bits(r.to_bits().wrapping_add(127) << 23) * p
}

/// One bilateral pass.
pub fn bilateral(image: &Image, params: &BilateralParams) -> Image {
    let (w, h) = (image.width(), image.height());
    let r = params.radius;
    let side = 2 * r + 1;
    let pw = w + 2 * r;
    let ss = params.sigma_space as f64;
    // spatial term as a log weight, added to the colour term inside one exp
    let spatial: Vec<f32> = (0..side * side)
        .map(|i| {
            let dy = (i / side) as f64 - r as f64;
            let dx = (i % side) as f64 - r as f64;
            (-(dx * dx + dy * dy) / (2.0 * ss * ss)) as f32
        })
        .collect();
    let kc = (1.0 / (2.0 * params.sigma_color as f64 * params.sigma_color as f64)) as f32;

    // one reflect-padded plane per channel
    let src = image.as_slice();
    let planes: Vec<Vec<f32>> = (0..CHANNELS)
        .map(|c| {
            let mut plane = Vec::with_capacity(pw * (h + 2 * r));
            for py in 0..h + 2 * r {
                let y = reflect_101(py as isize - r as isize, h);
                plane.extend((0..pw).map(|px| src[(y * w + reflect_101(px as isize - r as isize, w)) * CHANNELS + c]));
            }
            plane
        })
        .collect();

    let mut out = vec![0f32; src.len()];
    out.par_chunks_mut(w * CHANNELS)
        .enumerate()
        .for_each(|(y, out_row)| {
            let mut acc = vec![0f32; w];
            let mut norm = vec![0f32; w];
            for (c, plane) in planes.iter().enumerate() {
                let centre = &plane[(y + r) * pw + r..][..w];
                acc.fill(0.0);
                norm.fill(0.0);
                for ky in 0..side {
                    let row = &plane[(y + ky) * pw..][..pw];
                    for kx in 0..side {
                        let s = spatial[ky * side + kx];
                        let q = &row[kx..kx + w];
                        for (((&qv, &cv), a), n) in q.iter().zip(centre).zip(acc.iter_mut()).zip(norm.iter_mut()) {
                            let d = qv - cv;
                            let wgt = exp_neg(s - d * d * kc);
                            *a += wgt * d;
                            *n += wgt;
                        }
                    }
                }
                for x in 0..w {
                    // written as an offset from the centre so flat regions stay exact
                    out_row[x * CHANNELS + c] = if acc[x] == 0.0 {
                        centre[x]
                    } else {
                        centre[x] + acc[x] / norm[x]
                    };
                }
            }
        });
    Image::from_vec(w, h, out).expect("same dimensions as input")
}

/// Parameters of each [`smooth`] pass.
pub fn smooth_params() -> BilateralParams {
    BilateralParams::new(SMOOTH_SIGMA, SMOOTH_SIGMA).expect("constants are valid")
}

/// Four small bilateral passes (sigma 10 for colour and space).
pub fn smooth(image: &Image) -> Image {
    let params = smooth_params();
    let mut current = bilateral(image, &params);
    for _ in 1..SMOOTH_PASSES {
        current = bilateral(&current, &params);
    }
    current
}

/// The single wide pass (sigma 40) that [`smooth`] approximates.
pub fn smooth_large(image: &Image) -> Image {
    let params = BilateralParams::new(LARGE_SIGMA, LARGE_SIGMA).expect("constants are valid");
    bilateral(image, &params)
}
