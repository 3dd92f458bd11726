use std::mem::size_of;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::raster::{Image, Sample, CHANNELS};
use crate::smoothing::smooth;
use crate::transforms::{apply_checked, MeteredTransform, Transform, TransformUsage};

use super::{
    cut, expand, recut_subimage, shuffle, Block, BlockGrid, PipelineConfig, PipelineError, Restorer,
    SubImagePlan,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// Counters collected while a pipeline runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub width: usize,
    pub height: usize,
    pub expanded_width: usize,
    pub expanded_height: usize,
    pub n_total: usize,
    pub n_block: usize,
    pub n_subimg: usize,
    pub subimage_side: usize,
    pub usage: TransformUsage,
    /// Rough upper bound on bytes held at once.
    pub peak_resident_bytes: u64,
    pub timings: Vec<StageTiming>,
}

#[derive(Clone, Debug)]
pub struct PipelineRun {
    pub image: Image,
    pub trace: RunTrace,
}

struct Stopwatch {
    last: Instant,
    timings: Vec<StageTiming>,
}

impl Stopwatch {
    fn new() -> Self {
        Self {
            last: Instant::now(),
            timings: Vec::new(),
        }
    }

    fn push(&mut self, stage: &str, seconds: f64) {
        self.timings.push(StageTiming {
            stage: stage.to_string(),
            seconds,
        });
        self.last = Instant::now();
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.timings.push(StageTiming {
            stage: stage.to_string(),
            seconds: (now - self.last).as_secs_f64(),
        });
        self.last = now;
    }
}

fn peak_estimate<T: Sample>(image: &Image<T>, grid: &BlockGrid, plan: &SubImagePlan, cfg: &PipelineConfig) -> u64 {
    let f = size_of::<f32>() as u64;
    let ch = CHANNELS as u64;
    let input = (image.area() * CHANNELS * size_of::<T>()) as u64;
    let expanded = (grid.expanded_width() * grid.expanded_height() * CHANNELS * size_of::<T>()) as u64;
    let side = plan.side() as u64;
    // per worker: the rendered and transformed sub-image plus its recut blocks
    let in_flight = cfg.workers as u64 * 3 * side * side * ch * f;
    // base + delta per channel, one weight per pixel
    let canvas = image.area() as u64 * (2 * ch + 1) * f;
    input + expanded + in_flight + canvas
}

/// Runs expand, cut, shuffle, concatenate, transform, recut, restore and
/// (optionally) smooth.
///
/// Sub-images are rendered and transformed `cfg.workers` at a time. Each
/// batch is recut and feathered into the output in sub-image order before
/// the next starts, so only one batch of blocks is held at once and the
/// output does not depend on scheduling.
pub fn run_pipeline<T: Sample>(
    image: &Image<T>,
    transform: &dyn Transform,
    cfg: &PipelineConfig,
) -> Result<PipelineRun, PipelineError> {
    cfg.validate()?;
    let mut clock = Stopwatch::new();
    let grid = BlockGrid::new(image.width(), image.height(), cfg);

    let expanded = expand(image, cfg)?;
    clock.lap("expand");
    let views = cut(&expanded, cfg)?;
    clock.lap("cut");
    let order = shuffle(views, cfg.seed);
    clock.lap("shuffle");
    let plan = SubImagePlan::new(&order, cfg)?;
    drop(order);
    clock.lap("concatenate");

    let budget = (cfg.w_max * cfg.w_max) as u64;
    let meter = MeteredTransform::new(transform);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| PipelineError::Workers(e.to_string()))?;
    let mut restorer = Restorer::new(cfg, image.width(), image.height())?;
    let (mut transform_secs, mut restore_secs) = (0.0, 0.0);
    let indices: Vec<usize> = (0..plan.n_subimg()).collect();
    for batch in indices.chunks(cfg.workers) {
        let started = Instant::now();
        let results: Vec<Result<Vec<Block>, PipelineError>> = pool.install(|| {
            batch
                .par_iter()
                .map(|&k| {
                    let sub = plan.render(k, &expanded);
                    let area = sub.area() as u64;
                    if area > budget {
                        return Err(PipelineError::BudgetExceeded { index: k, area, budget });
                    }
                    let styled = apply_checked(&meter, &sub)
                        .map_err(|source| PipelineError::Transform { index: k, source })?;
                    drop(sub);
                    Ok(recut_subimage(&plan, k, &styled, cfg)?)
                })
                .collect()
        });
        let transformed = Instant::now();
        for blocks in results {
            for b in blocks? {
                restorer.add(&b)?;
            }
        }
        transform_secs += (transformed - started).as_secs_f64();
        restore_secs += transformed.elapsed().as_secs_f64();
    }
    drop(expanded);
    clock.push("transform+recut", transform_secs);
    clock.push("restore", restore_secs);
    let mut out = restorer.finish()?;
    clock.lap("finish");
    if cfg.smoothing {
        out = smooth(&out);
        clock.lap("smooth");
    }

    let trace = RunTrace {
        width: image.width(),
        height: image.height(),
        expanded_width: grid.expanded_width(),
        expanded_height: grid.expanded_height(),
        n_total: grid.n_total(),
        n_block: plan.counts.n_block,
        n_subimg: plan.n_subimg(),
        subimage_side: plan.side(),
        usage: meter.usage(),
        peak_resident_bytes: peak_estimate(image, &grid, &plan, cfg),
        timings: clock.timings,
    };
    Ok(PipelineRun { image: out, trace })
}
