//! Quantitative checks: colour histograms and their distances, error against
//! an oracle, tiling overhead, transform budget accounting and seam
//! discontinuity.

mod manifest;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{crop, quantize_sample, Image, Rect, Sample, CHANNELS};
use crate::tiler::{
    cut, expand, shuffle, BlockGrid, ConfigError, PackingCounts, PipelineConfig, RunTrace,
    SubImagePlan, TilerError,
};

pub use manifest::{DiagnosticsSummary, InputInfo, RunManifest, SmoothingInfo, TransformInfo, MANIFEST_SCHEMA};

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("histogram channel {channel} sums to {sum}, not 1")]
    Unnormalized { channel: usize, sum: f64 },
    #[error("images differ in size: {a:?} vs {b:?}")]
    DimensionMismatch { a: (usize, usize), b: (usize, usize) },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Tiler(#[from] TilerError),
}

const NORM_TOLERANCE: f64 = 1e-9;

/// Per-channel normalized 256-bin histogram.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub bins: [[f64; 256]; CHANNELS],
}

impl Histogram {
    /// Builds a histogram from raw counts; all channels must have the same
    /// non-zero total.
    pub fn from_counts(counts: &[[u64; 256]; CHANNELS]) -> Self {
        let mut bins = [[0f64; 256]; CHANNELS];
        for c in 0..CHANNELS {
            let total: u64 = counts[c].iter().sum();
            for i in 0..256 {
                bins[c][i] = counts[c][i] as f64 / total as f64;
            }
        }
        Self { bins }
    }

    pub fn check_normalized(&self) -> Result<(), DiagnosticsError> {
        for (channel, bins) in self.bins.iter().enumerate() {
            let sum: f64 = bins.iter().sum();
            if (sum - 1.0).abs() > NORM_TOLERANCE || bins.iter().any(|&b| b < 0.0) {
                return Err(DiagnosticsError::Unnormalized { channel, sum });
            }
        }
        Ok(())
    }
}

fn channel_counts<T: Sample>(image: &Image<T>) -> [[u64; 256]; CHANNELS] {
    let mut counts = [[0u64; 256]; CHANNELS];
    for px in image.as_slice().chunks_exact(CHANNELS) {
        for c in 0..CHANNELS {
            counts[c][quantize_sample(px[c].to_f32()) as usize] += 1;
        }
    }
    counts
}

/// Float samples are rounded to the nearest level before binning.
pub fn rgb_histogram<T: Sample>(image: &Image<T>) -> Histogram {
    Histogram::from_counts(&channel_counts(image))
}

/// Mean over channels of the L1 distance between bin vectors, in `[0, 2]`.
pub fn histogram_distance(a: &Histogram, b: &Histogram) -> Result<f64, DiagnosticsError> {
    a.check_normalized()?;
    b.check_normalized()?;
    let total: f64 = (0..CHANNELS)
        .map(|c| {
            a.bins[c]
                .iter()
                .zip(&b.bins[c])
                .map(|(x, y)| (x - y).abs())
                .sum::<f64>()
        })
        .sum();
    Ok(total / CHANNELS as f64)
}

/// Root mean squared error over all channel samples.
pub fn rmse<A: Sample, B: Sample>(a: &Image<A>, b: &Image<B>) -> Result<f64, DiagnosticsError> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(DiagnosticsError::DimensionMismatch {
            a: (a.width(), a.height()),
            b: (b.width(), b.height()),
        });
    }
    let sum: f64 = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| {
            let d = x.to_f32() as f64 - y.to_f32() as f64;
            d * d
        })
        .sum();
    Ok((sum / a.as_slice().len() as f64).sqrt())
}

/// Extra transform work caused by block padding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverheadReport {
    /// `(w_block / w_basic)²`
    pub alpha: f64,
    /// Block pixels over input pixels, `n_total * w_block² / (W * H)`.
    pub block_pixel_ratio: f64,
    /// Sub-image pixels (fillers included) over input pixels.
    pub measured_ratio: f64,
    pub n_total: usize,
    pub n_block: usize,
    pub n_subimg: usize,
    pub w_block: usize,
    pub subimage_side: usize,
}

pub fn overhead_factor(cfg: &PipelineConfig, width: usize, height: usize) -> Result<OverheadReport, DiagnosticsError> {
    cfg.validate_geometry()?;
    let grid = BlockGrid::new(width, height, cfg);
    let packing = PackingCounts::new(grid.n_total(), cfg)?;
    let ratio = cfg.w_padding as f64 / cfg.w_basic as f64;
    let pixels = (width * height) as f64;
    let wb = cfg.w_block();
    Ok(OverheadReport {
        alpha: (1.0 + 2.0 * ratio).powi(2),
        block_pixel_ratio: (grid.n_total() * wb * wb) as f64 / pixels,
        measured_ratio: (packing.n_subimg * packing.subimage_side * packing.subimage_side) as f64 / pixels,
        n_total: grid.n_total(),
        n_block: packing.n_block,
        n_subimg: packing.n_subimg,
        w_block: wb,
        subimage_side: packing.subimage_side,
    })
}

/// What the transform was asked to hold in memory.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub max_transform_area: u64,
    pub transform_calls: u64,
    pub budget_area: u64,
    pub within_budget: bool,
    pub peak_resident_bytes: u64,
}

pub fn budget_trace(trace: &RunTrace, w_max: usize) -> BudgetReport {
    let budget_area = (w_max * w_max) as u64;
    BudgetReport {
        max_transform_area: trace.usage.max_area,
        transform_calls: trace.usage.calls,
        budget_area,
        within_budget: trace.usage.max_area <= budget_area,
        peak_resident_bytes: trace.peak_resident_bytes,
    }
}

/// Largest neighbour difference across designated seam lines versus
/// everywhere else.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeamJumps {
    pub border_max: f64,
    pub interior_max: f64,
}

impl SeamJumps {
    pub fn ratio(&self) -> f64 {
        self.border_max / self.interior_max
    }
}

/// `cols` holds x positions where a seam separates columns `x - 1` and `x`;
/// `rows` likewise for horizontal seams.
pub fn seam_jumps<T: Sample>(image: &Image<T>, cols: &[usize], rows: &[usize]) -> SeamJumps {
    let (w, h) = (image.width(), image.height());
    let mut is_col = vec![false; w + 1];
    for &x in cols {
        if x < is_col.len() {
            is_col[x] = true;
        }
    }
    let mut is_row = vec![false; h + 1];
    for &y in rows {
        if y < is_row.len() {
            is_row[y] = true;
        }
    }
    let mut border = 0f64;
    let mut interior = 0f64;
    let diff = |a: [T; CHANNELS], b: [T; CHANNELS]| {
        (0..CHANNELS)
            .map(|c| (a[c].to_f32() as f64 - b[c].to_f32() as f64).abs())
            .fold(0f64, f64::max)
    };
    for y in 0..h {
        for x in 0..w {
            let p = image.pixel(x, y);
            if x > 0 {
                let d = diff(p, image.pixel(x - 1, y));
                if is_col[x] {
                    border = border.max(d);
                } else {
                    interior = interior.max(d);
                }
            }
            if y > 0 {
                let d = diff(p, image.pixel(x, y - 1));
                if is_row[y] {
                    border = border.max(d);
                } else {
                    interior = interior.max(d);
                }
            }
        }
    }
    SeamJumps {
        border_max: border,
        interior_max: interior,
    }
}

/// Mean and worst distance of a set of histograms to a reference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceSummary {
    pub count: usize,
    pub mean: f64,
    pub worst: f64,
}

impl DistanceSummary {
    fn from_values(values: &[f64]) -> Self {
        Self {
            count: values.len(),
            mean: values.iter().sum::<f64>() / values.len().max(1) as f64,
            worst: values.iter().copied().fold(0.0, f64::max),
        }
    }
}

/// How closely shuffled sub-images and contiguous tiles of the same size
/// reproduce the colour distribution of the whole image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    pub tile_side: usize,
    pub shuffled: DistanceSummary,
    pub contiguous: DistanceSummary,
}

impl DistributionReport {
    /// Shuffled over contiguous mean distance; `None` when both are zero.
    pub fn ratio(&self) -> Option<f64> {
        (self.contiguous.mean > 0.0).then(|| self.shuffled.mean / self.contiguous.mean)
    }
}

/// Contiguous tiles are the full `side`-square cells of a partition anchored
/// at the origin; images smaller than `side` contribute themselves.
pub fn distribution_report<T: Sample>(
    image: &Image<T>,
    cfg: &PipelineConfig,
) -> Result<DistributionReport, DiagnosticsError> {
    let reference = rgb_histogram(image);
    let expanded = expand(image, cfg)?;
    let order = shuffle(cut(&expanded, cfg)?, cfg.seed);
    let plan = SubImagePlan::new(&order, cfg)?;
    drop(order);
    let shuffled = (0..plan.n_subimg())
        .map(|k| histogram_distance(&rgb_histogram(&plan.render(k, &expanded)), &reference))
        .collect::<Result<Vec<_>, _>>()?;
    drop(expanded);

    let side = plan.side();
    let mut contiguous = Vec::new();
    if image.width() < side || image.height() < side {
        let tw = side.min(image.width());
        let th = side.min(image.height());
        let tile = crop(image, Rect::new(0, 0, tw, th)).expect("tile fits");
        contiguous.push(histogram_distance(&rgb_histogram(&tile), &reference)?);
    } else {
        for y0 in (0..=image.height() - side).step_by(side) {
            for x0 in (0..=image.width() - side).step_by(side) {
                let tile = crop(image, Rect::new(x0, y0, side, side)).expect("tile fits");
                contiguous.push(histogram_distance(&rgb_histogram(&tile), &reference)?);
            }
        }
    }
    Ok(DistributionReport {
        tile_side: side,
        shuffled: DistanceSummary::from_values(&shuffled),
        contiguous: DistanceSummary::from_values(&contiguous),
    })
}
