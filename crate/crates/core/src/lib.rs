//! Block shuffle tiling: apply a whole-image style transform to an image
//! larger than the transform can hold, by shuffling small padded blocks into
//! budget-sized sub-images and stitching the results back.

pub mod baselines;
pub mod diagnostics;
pub mod fixtures;
pub mod raster;
pub mod smoothing;
pub mod tiler;
pub mod transforms;
