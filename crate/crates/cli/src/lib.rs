//! `blockshuffle` command line: `stylize`, `compare`, `diagnose` and
//! `replay`.
//!
//! Exit codes: 0 success, 2 invalid flags or configuration, 3 I/O failure,
//! 4 transform failure.

mod methods;
mod spec;

use std::path::{Path, PathBuf};

use blockshuffle::baselines::TileConfig;
use blockshuffle::diagnostics::{
    distribution_report, overhead_factor, rmse, seam_jumps, DistributionReport, InputInfo, OverheadReport,
    RunManifest, TransformInfo,
};
use blockshuffle::raster::{load_image, save_image, Image, ImageFormat, RasterError};
use blockshuffle::tiler::PipelineConfig;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

pub use methods::{run_method, tile_borders, Method, MethodRun};
pub use spec::TransformSpec;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("transform failed: {0}")]
    Transform(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Transform(_) => 4,
        }
    }
}

impl From<RasterError> for CliError {
    fn from(e: RasterError) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "blockshuffle", version, about = "Stylize large images under a pixel budget by block shuffling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Transform one image with one method and write it with a manifest.
    Stylize(StylizeArgs),
    /// Run several methods and report error against the whole-image result.
    Compare(CompareArgs),
    /// Report colour-distribution distances and padding overhead.
    Diagnose(DiagnoseArgs),
    /// Re-run the configuration recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args)]
pub struct TilingArgs {
    /// Side of the region each block owns in the output.
    #[arg(long, default_value_t = 16)]
    pub w_basic: usize,
    /// Context margin around each block.
    #[arg(long, default_value_t = 16)]
    pub w_padding: usize,
    /// Largest square side the transform may receive.
    #[arg(long, default_value_t = 1000)]
    pub w_max: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Pixels dropped from each transformed block edge.
    #[arg(long, default_value_t = 8)]
    pub trim: usize,
    /// Skip the final bilateral smoothing.
    #[arg(long)]
    pub no_smooth: bool,
    /// Threads running the transform.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Tile side for the naive and feather methods (default: --w-max).
    #[arg(long)]
    pub tile: Option<usize>,
    /// Feathering overlap for the feather method.
    #[arg(long, default_value_t = 128)]
    pub overlap: usize,
}

impl TilingArgs {
    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            w_basic: self.w_basic,
            w_padding: self.w_padding,
            w_max: self.w_max,
            seed: self.seed,
            trim: self.trim,
            smoothing: !self.no_smooth,
            workers: self.workers,
        }
    }

    pub fn tile_config(&self) -> TileConfig {
        methods::tile_config(self.tile, self.overlap, &self.pipeline_config())
    }
}

#[derive(Debug, Clone, Args)]
pub struct TransformArgs {
    /// identity, lut:<json file>, gnorm:<mean,std> or cmd:<shell template with {in} and {out}>
    #[arg(long, default_value = "identity")]
    pub transform: String,
    /// Treat a cmd: transform as deterministic in the manifest.
    #[arg(long)]
    pub assume_deterministic: bool,
}

#[derive(Debug, Args)]
pub struct StylizeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::Blockshuffle)]
    pub method: Method,
    #[command(flatten)]
    pub transform: TransformArgs,
    #[command(flatten)]
    pub tiling: TilingArgs,
    /// Tile even when the image fits the budget.
    #[arg(long)]
    pub force_tiling: bool,
    /// Manifest path (default: <output>.json).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Directory receiving one image and manifest per method.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = Method::ALL)]
    pub methods: Vec<Method>,
    #[command(flatten)]
    pub transform: TransformArgs,
    #[command(flatten)]
    pub tiling: TilingArgs,
    /// CSV destination (default: stdout).
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// Skip the whole-image reference, e.g. when it would not fit in memory.
    #[arg(long)]
    pub no_oracle: bool,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub tiling: TilingArgs,
    /// JSON destination (default: stdout).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output path (default: the one recorded in the manifest).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Stylize(args) => cmd_stylize(&args),
        Command::Compare(args) => cmd_compare(&args),
        Command::Diagnose(args) => cmd_diagnose(&args),
        Command::Replay(args) => cmd_replay(&args),
    }
}

fn output_format(path: &Path) -> Result<ImageFormat, CliError> {
    ImageFormat::from_path(path)
        .ok_or_else(|| CliError::Usage(format!("{}: output must end in .png, .jpg or .jpeg", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn default_manifest_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn workdir() -> PathBuf {
    std::env::temp_dir()
}

struct Job<'a> {
    input: &'a Path,
    method: Method,
    transform: &'a TransformArgs,
    cfg: PipelineConfig,
    tile: TileConfig,
    force_tiling: bool,
}

fn manifest_for(job: &Job, transform_info: TransformInfo, image: &Image<u8>, run: &MethodRun) -> RunManifest {
    let mut m = RunManifest::new(
        job.method.as_str(),
        transform_info,
        job.cfg.clone(),
        InputInfo {
            path: Some(job.input.display().to_string()),
            width: image.width(),
            height: image.height(),
        },
    );
    if matches!(job.method, Method::Naive | Method::Feather) {
        m.tile = Some(job.tile);
    }
    m.bypassed = run.bypassed;
    if run.bypassed {
        m.smoothing = None;
    }
    m.diagnostics.budget = Some(run.budget.clone());
    m.timings = run.timings.clone();
    m
}

fn stylize_job(job: &Job, output: &Path, manifest_path: &Path) -> Result<RunManifest, CliError> {
    let format = output_format(output)?;
    let spec = TransformSpec::parse(&job.transform.transform)?;
    let transform = spec.build(&workdir(), job.transform.assume_deterministic)?;
    let image = load_image(job.input)?;
    let run = run_method(job.method, &image, transform.as_ref(), &job.cfg, &job.tile, job.force_tiling)?;
    save_image(&run.image.quantize(), output, format)?;
    let info = TransformInfo {
        name: transform.name(),
        spec: job.transform.transform.clone(),
        deterministic: transform.deterministic(),
    };
    let mut manifest = manifest_for(job, info, &image, &run);
    manifest.output = Some(output.display().to_string());
    write_text(manifest_path, &manifest.to_json())?;
    Ok(manifest)
}

pub fn cmd_stylize(args: &StylizeArgs) -> Result<(), CliError> {
    let job = Job {
        input: &args.input,
        method: args.method,
        transform: &args.transform,
        cfg: args.tiling.pipeline_config(),
        tile: args.tiling.tile_config(),
        force_tiling: args.force_tiling,
    };
    let manifest_path = args.manifest.clone().unwrap_or_else(|| default_manifest_path(&args.output));
    stylize_job(&job, &args.output, &manifest_path).map(|_| ())
}

pub fn cmd_replay(args: &ReplayArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.manifest)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.manifest.display())))?;
    let recorded = RunManifest::from_json(&text).map_err(|e| CliError::Usage(format!("bad manifest: {e}")))?;
    let method = Method::ALL
        .into_iter()
        .find(|m| m.as_str() == recorded.method)
        .ok_or_else(|| CliError::Usage(format!("unknown method {:?}", recorded.method)))?;
    let input = recorded
        .input
        .path
        .clone()
        .ok_or_else(|| CliError::Usage("manifest has no input path".into()))?;
    let output = match (&args.output, &recorded.output) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) => PathBuf::from(p),
        (None, None) => return Err(CliError::Usage("no output path given or recorded".into())),
    };
    let transform = TransformArgs {
        transform: recorded.transform.spec.clone(),
        assume_deterministic: recorded.transform.deterministic,
    };
    let input = PathBuf::from(input);
    let job = Job {
        input: &input,
        method: if recorded.bypassed { Method::Whole } else { method },
        transform: &transform,
        cfg: recorded.config.clone(),
        tile: recorded.tile.unwrap_or_else(|| methods::tile_config(None, 128, &recorded.config)),
        force_tiling: true,
    };
    let mut manifest = stylize_job(&job, &output, &default_manifest_path(&output))?;
    // keep the replayed manifest comparable to the recorded one
    if recorded.bypassed {
        manifest.method = recorded.method.clone();
        manifest.bypassed = true;
        manifest.diagnostics = recorded.diagnostics.clone();
        write_text(&default_manifest_path(&output), &manifest.to_json())?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct MetricsRow {
    method: &'static str,
    rmse: Option<f64>,
    border_max_jump: f64,
    interior_max_jump: f64,
    border_ratio: Option<f64>,
    max_transform_area: u64,
    transform_calls: u64,
    bypassed: bool,
    seconds: f64,
    output: String,
}

pub fn cmd_compare(args: &CompareArgs) -> Result<(), CliError> {
    let spec = TransformSpec::parse(&args.transform.transform)?;
    let cfg = args.tiling.pipeline_config();
    let tile = args.tiling.tile_config();
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    for m in &args.methods {
        if matches!(m, Method::Naive | Method::Feather) {
            tile.validate(Some(cfg.w_max), *m == Method::Feather)
                .map_err(|e| CliError::Usage(e.to_string()))?;
        }
    }
    let transform = spec.build(&workdir(), args.transform.assume_deterministic)?;
    let image = load_image(&args.input)?;
    std::fs::create_dir_all(&args.out_dir).map_err(|e| CliError::Io(format!("{}: {e}", args.out_dir.display())))?;

    let oracle = if args.no_oracle {
        None
    } else {
        Some(run_method(Method::Whole, &image, transform.as_ref(), &cfg, &tile, false)?.image)
    };
    let info = TransformInfo {
        name: transform.name(),
        spec: args.transform.transform.clone(),
        deterministic: transform.deterministic(),
    };
    let stem = args
        .input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".into());

    let mut rows = Vec::new();
    for &method in &args.methods {
        let job = Job {
            input: &args.input,
            method,
            transform: &args.transform,
            cfg: cfg.clone(),
            tile,
            force_tiling: true,
        };
        let run = run_method(method, &image, transform.as_ref(), &cfg, &tile, true)?;
        let out_path = args.out_dir.join(format!("{stem}-{}.png", method.as_str()));
        save_image(&run.image.quantize(), &out_path, ImageFormat::Png)?;
        let error = oracle.as_ref().map(|o| rmse(&run.image, o)).transpose().map_err(|e| CliError::Io(e.to_string()))?;
        let cols = tile_borders(method, image.width(), &cfg, &tile, run.bypassed);
        let rws = tile_borders(method, image.height(), &cfg, &tile, run.bypassed);
        let jumps = seam_jumps(&run.image, &cols, &rws);
        let mut manifest = manifest_for(&job, info.clone(), &image, &run);
        manifest.output = Some(out_path.display().to_string());
        if let Some(e) = error {
            manifest.diagnostics.metrics.insert("rmse_vs_whole".into(), e);
        }
        manifest.diagnostics.metrics.insert("border_max_jump".into(), jumps.border_max);
        manifest.diagnostics.metrics.insert("interior_max_jump".into(), jumps.interior_max);
        write_text(&default_manifest_path(&out_path), &manifest.to_json())?;
        rows.push(MetricsRow {
            method: method.as_str(),
            rmse: error,
            border_max_jump: jumps.border_max,
            interior_max_jump: jumps.interior_max,
            border_ratio: (jumps.interior_max > 0.0 && !cols.is_empty()).then(|| jumps.ratio()),
            max_transform_area: run.budget.max_transform_area,
            transform_calls: run.budget.transform_calls,
            bypassed: run.bypassed,
            seconds: run.timings.iter().map(|t| t.seconds).sum(),
            output: out_path.display().to_string(),
        });
    }

    let sink: Box<dyn std::io::Write> = match &args.metrics {
        Some(path) => Box::new(
            std::fs::File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
        ),
        None => Box::new(std::io::stdout()),
    };
    let mut writer = csv::Writer::from_writer(sink);
    for row in &rows {
        writer.serialize(row).map_err(|e| CliError::Io(e.to_string()))?;
    }
    writer.flush().map_err(|e| CliError::Io(e.to_string()))
}

#[derive(Debug, Serialize)]
struct DiagnoseReport {
    input: InputInfo,
    config: PipelineConfig,
    overhead: OverheadReport,
    distribution: DistributionReport,
    shuffled_to_contiguous_ratio: Option<f64>,
}

pub fn cmd_diagnose(args: &DiagnoseArgs) -> Result<(), CliError> {
    let cfg = args.tiling.pipeline_config();
    cfg.validate_geometry().map_err(|e| CliError::Usage(e.to_string()))?;
    let image = load_image(&args.input)?;
    let overhead = overhead_factor(&cfg, image.width(), image.height()).map_err(|e| CliError::Usage(e.to_string()))?;
    let distribution = distribution_report(&image, &cfg).map_err(|e| CliError::Usage(e.to_string()))?;
    let report = DiagnoseReport {
        input: InputInfo {
            path: Some(args.input.display().to_string()),
            width: image.width(),
            height: image.height(),
        },
        config: cfg,
        shuffled_to_contiguous_ratio: distribution.ratio(),
        overhead,
        distribution,
    };
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    match &args.output {
        Some(path) => write_text(path, &text),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}
