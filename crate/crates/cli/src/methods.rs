use std::time::Instant;

use blockshuffle::baselines::{feather_tiles, naive_tiles, overlapping_starts, partition_starts, whole, BaselineError, TileConfig};
use blockshuffle::diagnostics::{budget_trace, BudgetReport};
use blockshuffle::raster::{Image, RasterError};
use blockshuffle::tiler::{run_pipeline, PipelineConfig, PipelineError, StageTiming, TilerError};
use blockshuffle::transforms::{MeteredTransform, Transform};
use clap::ValueEnum;
use serde::Serialize;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Blockshuffle,
    Feather,
    Naive,
    Whole,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Blockshuffle => "blockshuffle",
            Method::Feather => "feather",
            Method::Naive => "naive",
            Method::Whole => "whole",
        }
    }

    pub const ALL: [Method; 4] = [Method::Blockshuffle, Method::Feather, Method::Naive, Method::Whole];
}

pub struct MethodRun {
    pub image: Image,
    /// Block shuffle fell back to a single whole-image call.
    pub bypassed: bool,
    pub budget: BudgetReport,
    pub timings: Vec<StageTiming>,
}

fn baseline_error(e: BaselineError) -> CliError {
    match e {
        BaselineError::Config(msg) => CliError::Usage(msg),
        BaselineError::Transform { index, source } => CliError::Transform(format!("tile {index}: {source}")),
        BaselineError::Raster(e) => CliError::Io(e.to_string()),
    }
}

fn pipeline_error(e: PipelineError) -> CliError {
    match e {
        PipelineError::Tiler(TilerError::Config(e)) => CliError::Usage(e.to_string()),
        e @ (PipelineError::Transform { .. } | PipelineError::BudgetExceeded { .. }) => {
            CliError::Transform(e.to_string())
        }
        other => CliError::Io(other.to_string()),
    }
}

/// Side used by the tiled baselines: `--tile`, else the budget side.
pub fn tile_config(tile: Option<usize>, overlap: usize, cfg: &PipelineConfig) -> TileConfig {
    TileConfig {
        tile: tile.unwrap_or(cfg.w_max),
        overlap,
    }
}

fn metered_run(
    transform: &dyn Transform,
    w_max: usize,
    stage: &str,
    f: impl FnOnce(&dyn Transform) -> Result<Image, CliError>,
) -> Result<MethodRun, CliError> {
    let meter = MeteredTransform::new(transform);
    let start = Instant::now();
    let image = f(&meter)?;
    let usage = meter.usage();
    let budget_area = (w_max * w_max) as u64;
    Ok(MethodRun {
        image,
        bypassed: false,
        budget: BudgetReport {
            max_transform_area: usage.max_area,
            transform_calls: usage.calls,
            budget_area,
            within_budget: usage.max_area <= budget_area,
            peak_resident_bytes: 0,
        },
        timings: vec![StageTiming {
            stage: stage.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        }],
    })
}

/// Runs one method. Block shuffle degrades to a whole-image call when the
/// image already fits the budget (unless `force_tiling`) or is too small to
/// pad.
pub fn run_method(
    method: Method,
    image: &Image<u8>,
    transform: &dyn Transform,
    cfg: &PipelineConfig,
    tile: &TileConfig,
    force_tiling: bool,
) -> Result<MethodRun, CliError> {
    let whole_run = |image: &Image<u8>| {
        let f = image.to_f32();
        metered_run(transform, cfg.w_max, "whole", |t| whole(&f, t).map_err(baseline_error))
    };
    match method {
        Method::Whole => whole_run(image),
        Method::Naive | Method::Feather => {
            let feathered = method == Method::Feather;
            tile.validate(Some(cfg.w_max), feathered).map_err(baseline_error)?;
            let f = image.to_f32();
            metered_run(transform, cfg.w_max, method.as_str(), |t| {
                if feathered {
                    feather_tiles(&f, t, tile)
                } else {
                    naive_tiles(&f, t, tile)
                }
                .map_err(baseline_error)
            })
        }
        Method::Blockshuffle => {
            cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let fits = image.area() <= cfg.w_max * cfg.w_max;
            if fits && !force_tiling {
                return whole_run(image).map(|r| MethodRun { bypassed: true, ..r });
            }
            match run_pipeline(image, transform, cfg) {
                Ok(run) => Ok(MethodRun {
                    budget: budget_trace(&run.trace, cfg.w_max),
                    image: run.image,
                    bypassed: false,
                    timings: run.trace.timings,
                }),
                Err(PipelineError::Tiler(TilerError::Raster(RasterError::PadTooLarge { .. }))) => {
                    whole_run(image).map(|r| MethodRun { bypassed: true, ..r })
                }
                Err(e) => Err(pipeline_error(e)),
            }
        }
    }
}

/// Positions along one axis where a method's independently transformed
/// pieces meet.
pub fn tile_borders(method: Method, len: usize, cfg: &PipelineConfig, tile: &TileConfig, bypassed: bool) -> Vec<usize> {
    match method {
        Method::Whole => Vec::new(),
        Method::Blockshuffle if bypassed => Vec::new(),
        Method::Blockshuffle => (1..).map(|i| i * cfg.w_basic).take_while(|&x| x < len).collect(),
        Method::Naive => partition_starts(len, tile.tile).into_iter().skip(1).collect(),
        Method::Feather => {
            let mut edges: Vec<usize> = overlapping_starts(len, tile.tile, tile.overlap)
                .into_iter()
                .flat_map(|s| [s, s + tile.tile])
                .filter(|&x| x > 0 && x < len)
                .collect();
            edges.sort_unstable();
            edges.dedup();
            edges
        }
    }
}
