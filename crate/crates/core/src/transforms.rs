//! The pluggable image-to-image stylizer contract and reference transforms.
//!
//! A [`Transform`] is opaque to the tiling code: it receives an RGB image and
//! must return one of the same size. The reference implementations here are
//! used as oracles in tests and as stand-ins for a real style network:
//!
//! * [`Identity`] returns its input.
//! * [`PointwiseLut`] maps every sample through a per-channel table and is
//!   therefore independent of pixel position.
//! * [`GlobalNormalize`] re-standardizes each channel using statistics of the
//!   whole image it is given, so its output depends on the input's global
//!   pixel distribution the way instance normalization does.
//! * [`ExternalCommand`] shells out to any program that reads and writes PNG.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::Deserialize;
use thiserror::Error;

use crate::raster::{load_image, quantize_sample, save_image, Image, ImageFormat, CHANNELS};

#[derive(Debug, Error)]
pub enum TransformError {
    #[error("transform returned {got_w}x{got_h}, expected {want_w}x{want_h}")]
    DimensionMismatch {
        want_w: usize,
        want_h: usize,
        got_w: usize,
        got_h: usize,
    },
    #[error("malformed lookup table: {0}")]
    MalformedTable(String),
    #[error("command template must contain both {{in}} and {{out}}: {0:?}")]
    InvalidTemplate(String),
    #[error("failed to launch command: {0}")]
    Spawn(#[source] std::io::Error),
    #[error("command exited with status {code:?}: {stderr}")]
    ExitStatus { code: Option<i32>, stderr: String },
    #[error("command produced no output file at {0}")]
    MissingOutput(PathBuf),
    #[error("command output at {path} is not a readable image: {reason}")]
    GarbledOutput { path: PathBuf, reason: String },
    #[error("transform I/O failure: {0}")]
    Io(String),
}

/// An image-to-image function applied to every sub-image.
///
/// Implementations must be callable from several threads at once.
pub trait Transform: Send + Sync {
    fn name(&self) -> String;

    /// Whether equal inputs always yield equal outputs.
    fn deterministic(&self) -> bool {
        true
    }

    fn apply(&self, image: &Image) -> Result<Image, TransformError>;
}

impl<T: Transform + ?Sized> Transform for &T {
    fn name(&self) -> String {
        (**self).name()
    }
    fn deterministic(&self) -> bool {
        (**self).deterministic()
    }
    fn apply(&self, image: &Image) -> Result<Image, TransformError> {
        (**self).apply(image)
    }
}

impl<T: Transform + ?Sized> Transform for Box<T> {
    fn name(&self) -> String {
        (**self).name()
    }
    fn deterministic(&self) -> bool {
        (**self).deterministic()
    }
    fn apply(&self, image: &Image) -> Result<Image, TransformError> {
        (**self).apply(image)
    }
}

/// Runs `transform` and rejects outputs whose size differs from the input.
pub fn apply_checked<T: Transform + ?Sized>(
    transform: &T,
    image: &Image,
) -> Result<Image, TransformError> {
    let out = transform.apply(image)?;
    if out.width() != image.width() || out.height() != image.height() {
        return Err(TransformError::DimensionMismatch {
            want_w: image.width(),
            want_h: image.height(),
            got_w: out.width(),
            got_h: out.height(),
        });
    }
    Ok(out)
}

/// Call count and largest image area seen by a [`MeteredTransform`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct TransformUsage {
    pub calls: u64,
    pub max_area: u64,
}

/// Records how large the images handed to the inner transform are.
pub struct MeteredTransform<'a> {
    inner: &'a dyn Transform,
    calls: AtomicU64,
    max_area: AtomicU64,
}

impl<'a> MeteredTransform<'a> {
    pub fn new(inner: &'a dyn Transform) -> Self {
        Self {
            inner,
            calls: AtomicU64::new(0),
            max_area: AtomicU64::new(0),
        }
    }

    pub fn usage(&self) -> TransformUsage {
        TransformUsage {
            calls: self.calls.load(Ordering::SeqCst),
            max_area: self.max_area.load(Ordering::SeqCst),
        }
    }
}

impl Transform for MeteredTransform<'_> {
    fn name(&self) -> String {
        self.inner.name()
    }

    fn deterministic(&self) -> bool {
        self.inner.deterministic()
    }

    fn apply(&self, image: &Image) -> Result<Image, TransformError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.max_area.fetch_max(image.area() as u64, Ordering::SeqCst);
        self.inner.apply(image)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Identity;

pub fn identity() -> Identity {
    Identity
}

impl Transform for Identity {
    fn name(&self) -> String {
        "identity".into()
    }

    fn apply(&self, image: &Image) -> Result<Image, TransformError> {
        Ok(image.clone())
    }
}

/// Per-channel 256-entry curves. Input samples are rounded to the nearest
/// 8-bit level before lookup.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PointwiseLut {
    curves: [[u8; 256]; CHANNELS],
}

#[derive(Deserialize)]
struct LutFile {
    r: Vec<i64>,
    g: Vec<i64>,
    b: Vec<i64>,
}

impl PointwiseLut {
    pub fn new(curves: [[u8; 256]; CHANNELS]) -> Self {
        Self { curves }
    }

    /// Builds a table from untyped rows, checking shape and range.
    pub fn from_rows(rows: &[Vec<i64>]) -> Result<Self, TransformError> {
        if rows.len() != CHANNELS {
            return Err(TransformError::MalformedTable(format!(
                "expected {CHANNELS} curves, got {}",
                rows.len()
            )));
        }
        let mut curves = [[0u8; 256]; CHANNELS];
        for (c, row) in rows.iter().enumerate() {
            if row.len() != 256 {
                return Err(TransformError::MalformedTable(format!(
                    "curve {c} has {} entries, expected 256",
                    row.len()
                )));
            }
            for (i, &v) in row.iter().enumerate() {
                curves[c][i] = u8::try_from(v).map_err(|_| {
                    TransformError::MalformedTable(format!("curve {c} entry {i} = {v} outside 0..=255"))
                })?;
            }
        }
        Ok(Self { curves })
    }

    /// Parses `{"r": [...256], "g": [...], "b": [...]}`.
    pub fn from_json(text: &str) -> Result<Self, TransformError> {
        let file: LutFile =
            serde_json::from_str(text).map_err(|e| TransformError::MalformedTable(e.to_string()))?;
        Self::from_rows(&[file.r, file.g, file.b])
    }

    pub fn from_json_file(path: &Path) -> Result<Self, TransformError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TransformError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn identity() -> Self {
        let mut curve = [0u8; 256];
        for (i, v) in curve.iter_mut().enumerate() {
            *v = i as u8;
        }
        Self::new([curve; CHANNELS])
    }

    pub fn inversion() -> Self {
        let mut curve = [0u8; 256];
        for (i, v) in curve.iter_mut().enumerate() {
            *v = 255 - i as u8;
        }
        Self::new([curve; CHANNELS])
    }

    pub fn curves(&self) -> &[[u8; 256]; CHANNELS] {
        &self.curves
    }

    /// The table equivalent to applying `self` and then `next`.
    pub fn then(&self, next: &PointwiseLut) -> PointwiseLut {
        let mut curves = [[0u8; 256]; CHANNELS];
        for c in 0..CHANNELS {
            for i in 0..256 {
                curves[c][i] = next.curves[c][self.curves[c][i] as usize];
            }
        }
        PointwiseLut { curves }
    }

    #[inline]
    pub fn map_sample(&self, channel: usize, v: f32) -> f32 {
        self.curves[channel][quantize_sample(v) as usize] as f32
    }
}

impl Transform for PointwiseLut {
    fn name(&self) -> String {
        "lut".into()
    }

    fn apply(&self, image: &Image) -> Result<Image, TransformError> {
        let mut out = image.clone();
        for px in out.as_mut_slice().chunks_exact_mut(CHANNELS) {
            for (c, v) in px.iter_mut().enumerate() {
                *v = self.map_sample(c, *v);
            }
        }
        Ok(out)
    }
}

pub fn pointwise_lut(curves: [[u8; 256]; CHANNELS]) -> PointwiseLut {
    PointwiseLut::new(curves)
}

/// Zero-variance guard for [`GlobalNormalize`].
pub const NORMALIZE_EPSILON: f64 = 1e-6;

/// Per-channel standardization against the statistics of the whole input:
/// `clamp((v - mean) / max(std, eps) * target_std + target_mean, 0, 255)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GlobalNormalize {
    pub target_mean: [f32; CHANNELS],
    pub target_std: [f32; CHANNELS],
}

impl GlobalNormalize {
    pub fn new(target_mean: [f32; CHANNELS], target_std: [f32; CHANNELS]) -> Result<Self, TransformError> {
        if target_std.iter().any(|s| !(*s > 0.0)) || target_mean.iter().any(|m| !m.is_finite()) {
            return Err(TransformError::MalformedTable(format!(
                "normalize targets must be finite with std > 0, got mean {target_mean:?} std {target_std:?}"
            )));
        }
        Ok(Self {
            target_mean,
            target_std,
        })
    }

    pub fn uniform(mean: f32, std: f32) -> Result<Self, TransformError> {
        Self::new([mean; CHANNELS], [std; CHANNELS])
    }
}

/// Population mean and standard deviation of each channel.
pub fn channel_stats(image: &Image) -> ([f64; CHANNELS], [f64; CHANNELS]) {
    let mut sum = [0f64; CHANNELS];
    let mut sq = [0f64; CHANNELS];
    for px in image.as_slice().chunks_exact(CHANNELS) {
        for c in 0..CHANNELS {
            let v = px[c] as f64;
            sum[c] += v;
            sq[c] += v * v;
        }
    }
    let n = image.area() as f64;
    let mut mean = [0f64; CHANNELS];
    let mut std = [0f64; CHANNELS];
    for c in 0..CHANNELS {
        mean[c] = sum[c] / n;
        std[c] = (sq[c] / n - mean[c] * mean[c]).max(0.0).sqrt();
    }
    (mean, std)
}

impl Transform for GlobalNormalize {
    fn name(&self) -> String {
        "gnorm".into()
    }

    fn apply(&self, image: &Image) -> Result<Image, TransformError> {
        let (mean, std) = channel_stats(image);
        let gain: [f64; CHANNELS] =
            std::array::from_fn(|c| self.target_std[c] as f64 / std[c].max(NORMALIZE_EPSILON));
        let mut out = image.clone();
        for px in out.as_mut_slice().chunks_exact_mut(CHANNELS) {
            for c in 0..CHANNELS {
                let v = self.target_mean[c] as f64 + (px[c] as f64 - mean[c]) * gain[c];
                px[c] = v.clamp(0.0, 255.0) as f32;
            }
        }
        Ok(out)
    }
}

pub fn global_normalize(
    target_mean: [f32; CHANNELS],
    target_std: [f32; CHANNELS],
) -> Result<GlobalNormalize, TransformError> {
    GlobalNormalize::new(target_mean, target_std)
}

/// Runs a shell command per image. `{in}` and `{out}` in the template are
/// replaced with single-quoted paths of a PNG written for the command and the
/// PNG it must produce.
#[derive(Debug)]
pub struct ExternalCommand {
    template: String,
    workdir: PathBuf,
    deterministic: bool,
    counter: AtomicU64,
}

impl ExternalCommand {
    pub fn new(template: impl Into<String>, workdir: impl Into<PathBuf>) -> Result<Self, TransformError> {
        let template = template.into();
        if !template.contains("{in}") || !template.contains("{out}") {
            return Err(TransformError::InvalidTemplate(template));
        }
        Ok(Self {
            template,
            workdir: workdir.into(),
            deterministic: false,
            counter: AtomicU64::new(0),
        })
    }

    /// Marks the wrapped command as deterministic.
    pub fn assume_deterministic(mut self, yes: bool) -> Self {
        self.deterministic = yes;
        self
    }

    pub fn template(&self) -> &str {
        &self.template
    }

    fn temp_paths(&self) -> (PathBuf, PathBuf) {
        let n = self.counter.fetch_add(1, Ordering::Relaxed);
        let pid = std::process::id();
        (
            self.workdir.join(format!("bs-{pid}-{n}-in.png")),
            self.workdir.join(format!("bs-{pid}-{n}-out.png")),
        )
    }
}

fn shell_quote(path: &Path) -> String {
    format!("'{}'", path.display().to_string().replace('\'', r"'\''"))
}

impl Transform for ExternalCommand {
    fn name(&self) -> String {
        format!("cmd:{}", self.template)
    }

    fn deterministic(&self) -> bool {
        self.deterministic
    }

    fn apply(&self, image: &Image) -> Result<Image, TransformError> {
        let (in_path, out_path) = self.temp_paths();
        let result = (|| {
            save_image(&image.quantize(), &in_path, ImageFormat::Png)
                .map_err(|e| TransformError::Io(e.to_string()))?;
            let cmd = self
                .template
                .replace("{in}", &shell_quote(&in_path))
                .replace("{out}", &shell_quote(&out_path));
            let output = Command::new("sh")
                .arg("-c")
                .arg(&cmd)
                .current_dir(&self.workdir)
                .output()
                .map_err(TransformError::Spawn)?;
            if !output.status.success() {
                return Err(TransformError::ExitStatus {
                    code: output.status.code(),
                    stderr: String::from_utf8_lossy(&output.stderr).trim().to_string(),
                });
            }
            if !out_path.exists() {
                return Err(TransformError::MissingOutput(out_path.clone()));
            }
            let out = load_image(&out_path).map_err(|e| TransformError::GarbledOutput {
                path: out_path.clone(),
                reason: e.to_string(),
            })?;
            Ok(out.to_f32())
        })();
        let _ = std::fs::remove_file(&in_path);
        let _ = std::fs::remove_file(&out_path);
        let out = result?;
        if out.width() != image.width() || out.height() != image.height() {
            return Err(TransformError::DimensionMismatch {
                want_w: image.width(),
                want_h: image.height(),
                got_w: out.width(),
                got_h: out.height(),
            });
        }
        Ok(out)
    }
}

pub fn external_command(
    command_template: &str,
    workdir: &Path,
) -> Result<ExternalCommand, TransformError> {
    ExternalCommand::new(command_template, workdir)
}
