//! RGB raster values, reflection padding, cropping and PNG/JPEG codecs.
//!
//! Images are stored row-major with interleaved channels. Two sample depths
//! are used: `u8` at the I/O boundary and `f32` (nominally in `[0, 255]`) for
//! everything in between. Conversion back to 8 bits happens once, through
//! [`Image::quantize`].

use std::fmt::Debug;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use image::codecs::jpeg::JpegEncoder;
use image::codecs::png::PngEncoder;
use image::{ImageEncoder, ImageError, ImageReader};
use thiserror::Error;

/// Number of interleaved channels in every image.
pub const CHANNELS: usize = 3;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("invalid image dimensions {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },
    #[error("pixel buffer holds {actual} samples, expected {expected}")]
    BufferLength { expected: usize, actual: usize },
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported image format for {path}")]
    UnsupportedFormat { path: String },
    #[error("corrupt image stream in {path}: {reason}")]
    Corrupt { path: String, reason: String },
    #[error("cannot write {path}: {reason}")]
    Unwritable { path: String, reason: String },
    #[error("padding {pad} on the {side} side needs an image dimension above {pad}, got {dim}")]
    PadTooLarge {
        side: &'static str,
        pad: usize,
        dim: usize,
    },
    #[error("rect {rect:?} does not fit inside a {width}x{height} image")]
    RectOutOfBounds {
        rect: Rect,
        width: usize,
        height: usize,
    },
}

/// Channel sample type.
pub trait Sample: Copy + Default + PartialEq + Debug + Send + Sync + 'static {
    fn to_f32(self) -> f32;
}

impl Sample for u8 {
    #[inline]
    fn to_f32(self) -> f32 {
        self as f32
    }
}

impl Sample for f32 {
    #[inline]
    fn to_f32(self) -> f32 {
        self
    }
}

/// Rounds half away from zero after clamping to the 8-bit range.
#[inline]
pub fn quantize_sample(v: f32) -> u8 {
    if v.is_nan() {
        return 0;
    }
    v.clamp(0.0, 255.0).round() as u8
}

/// A 3-channel raster.
#[derive(Clone, PartialEq)]
pub struct Image<T = f32> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Sample> Debug for Image<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Image")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl<T: Sample> Image<T> {
    /// A zero-filled image.
    pub fn new(width: usize, height: usize) -> Result<Self, RasterError> {
        check_dims(width, height)?;
        Ok(Self {
            width,
            height,
            data: vec![T::default(); width * height * CHANNELS],
        })
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self, RasterError> {
        check_dims(width, height)?;
        let expected = width * height * CHANNELS;
        if data.len() != expected {
            return Err(RasterError::BufferLength {
                expected,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [T; CHANNELS],
    ) -> Result<Self, RasterError> {
        check_dims(width, height)?;
        let mut data = Vec::with_capacity(width * height * CHANNELS);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: [T; CHANNELS]) -> Result<Self, RasterError> {
        Self::from_fn(width, height, |_, _| value)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    /// Pixel count.
    #[inline]
    pub fn area(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [T; CHANNELS] {
        let i = (y * self.width + x) * CHANNELS;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: usize, y: usize, value: [T; CHANNELS]) {
        let i = (y * self.width + x) * CHANNELS;
        self.data[i..i + CHANNELS].copy_from_slice(&value);
    }

    /// Samples of row `y`.
    #[inline]
    pub fn row(&self, y: usize) -> &[T] {
        let stride = self.width * CHANNELS;
        &self.data[y * stride..(y + 1) * stride]
    }

    #[inline]
    pub fn row_mut(&mut self, y: usize) -> &mut [T] {
        let stride = self.width * CHANNELS;
        &mut self.data[y * stride..(y + 1) * stride]
    }

    pub fn full_rect(&self) -> Rect {
        Rect::new(0, 0, self.width, self.height)
    }

    pub fn to_f32(&self) -> Image<f32> {
        Image {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| v.to_f32()).collect(),
        }
    }

    pub fn map_samples<U: Sample>(&self, mut f: impl FnMut(T) -> U) -> Image<U> {
        Image {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Copies `src` so that its top-left corner lands at `(x0, y0)`.
    pub fn paste(&mut self, src: &Image<T>, x0: usize, y0: usize) -> Result<(), RasterError> {
        let rect = Rect::new(x0, y0, src.width, src.height);
        rect.check_inside(self.width, self.height)?;
        let n = src.width * CHANNELS;
        for y in 0..src.height {
            let start = ((y0 + y) * self.width + x0) * CHANNELS;
            self.data[start..start + n].copy_from_slice(src.row(y));
        }
        Ok(())
    }
}

impl Image<f32> {
    /// Converts to 8 bits, rounding half away from zero.
    pub fn quantize(&self) -> Image<u8> {
        self.map_samples(quantize_sample)
    }
}

fn check_dims(width: usize, height: usize) -> Result<(), RasterError> {
    if width == 0 || height == 0 {
        return Err(RasterError::InvalidDimensions { width, height });
    }
    Ok(())
}

/// An axis-aligned pixel region.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Rect {
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
}

impl Rect {
    pub const fn new(x0: usize, y0: usize, width: usize, height: usize) -> Self {
        Self {
            x0,
            y0,
            width,
            height,
        }
    }

    pub fn check_inside(&self, width: usize, height: usize) -> Result<(), RasterError> {
        let fits = self.width > 0
            && self.height > 0
            && self.x0.checked_add(self.width).is_some_and(|r| r <= width)
            && self.y0.checked_add(self.height).is_some_and(|b| b <= height);
        if fits {
            Ok(())
        } else {
            Err(RasterError::RectOutOfBounds {
                rect: *self,
                width,
                height,
            })
        }
    }
}

/// Exact copy of the region `rect`.
pub fn crop<T: Sample>(image: &Image<T>, rect: Rect) -> Result<Image<T>, RasterError> {
    rect.check_inside(image.width, image.height)?;
    let mut data = Vec::with_capacity(rect.width * rect.height * CHANNELS);
    for y in rect.y0..rect.y0 + rect.height {
        let row = image.row(y);
        data.extend_from_slice(&row[rect.x0 * CHANNELS..(rect.x0 + rect.width) * CHANNELS]);
    }
    Ok(Image {
        width: rect.width,
        height: rect.height,
        data,
    })
}

/// Maps any coordinate onto `0..n` by mirroring without repeating the edge
/// sample (`[a,b,c]` extends left as `c,b,a,b,c`). Far-out coordinates keep
/// bouncing between the two edges.
#[inline]
pub fn reflect_101(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    if (0..n as isize).contains(&i) {
        return i as usize;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// Reflection padding, reflect-101 convention. Each pad must be smaller than
/// the dimension it mirrors.
pub fn reflect_pad<T: Sample>(
    image: &Image<T>,
    left: usize,
    top: usize,
    right: usize,
    bottom: usize,
) -> Result<Image<T>, RasterError> {
    let (w, h) = (image.width, image.height);
    for (side, pad, dim) in [
        ("left", left, w),
        ("right", right, w),
        ("top", top, h),
        ("bottom", bottom, h),
    ] {
        if pad > 0 && pad >= dim {
            return Err(RasterError::PadTooLarge { side, pad, dim });
        }
    }
    let out_w = w + left + right;
    let out_h = h + top + bottom;
    let cols: Vec<usize> = (0..out_w)
        .map(|x| reflect_101(x as isize - left as isize, w))
        .collect();
    let mut data = Vec::with_capacity(out_w * out_h * CHANNELS);
    for y in 0..out_h {
        let src = image.row(reflect_101(y as isize - top as isize, h));
        for &sx in &cols[..left] {
            data.extend_from_slice(&src[sx * CHANNELS..(sx + 1) * CHANNELS]);
        }
        data.extend_from_slice(src);
        for &sx in &cols[left + w..] {
            data.extend_from_slice(&src[sx * CHANNELS..(sx + 1) * CHANNELS]);
        }
    }
    Ok(Image {
        width: out_w,
        height: out_h,
        data,
    })
}

/// Output encodings supported by [`save_image`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImageFormat {
    Png,
    Jpeg { quality: u8 },
}

impl ImageFormat {
    /// Picks the format from the file extension, JPEG at quality 95.
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "png" => Some(ImageFormat::Png),
            "jpg" | "jpeg" => Some(ImageFormat::Jpeg { quality: 95 }),
            _ => None,
        }
    }
}

/// Decodes a PNG or JPEG file into 8-bit RGB. Grayscale is promoted and
/// alpha is dropped.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image<u8>, RasterError> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let file = File::open(path).map_err(|source| RasterError::Unreadable {
        path: shown.clone(),
        source,
    })?;
    let reader = ImageReader::new(BufReader::new(file))
        .with_guessed_format()
        .map_err(|source| RasterError::Unreadable {
            path: shown.clone(),
            source,
        })?;
    match reader.format() {
        Some(image::ImageFormat::Png) | Some(image::ImageFormat::Jpeg) => {}
        _ => return Err(RasterError::UnsupportedFormat { path: shown }),
    }
    let decoded = reader.decode().map_err(|e| match e {
        ImageError::Unsupported(_) => RasterError::UnsupportedFormat {
            path: shown.clone(),
        },
        other => RasterError::Corrupt {
            path: shown.clone(),
            reason: other.to_string(),
        },
    })?;
    let rgb = decoded.into_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    Image::from_vec(w, h, rgb.into_raw())
}

/// Encodes `image` to `path`.
pub fn save_image(
    image: &Image<u8>,
    path: impl AsRef<Path>,
    format: ImageFormat,
) -> Result<(), RasterError> {
    let path = path.as_ref();
    let unwritable = |reason: String| RasterError::Unwritable {
        path: path.display().to_string(),
        reason,
    };
    let file = File::create(path).map_err(|e| unwritable(e.to_string()))?;
    let mut out = BufWriter::new(file);
    let (w, h) = (image.width as u32, image.height as u32);
    let result = match format {
        ImageFormat::Png => PngEncoder::new(&mut out).write_image(
            image.as_slice(),
            w,
            h,
            image::ExtendedColorType::Rgb8,
        ),
        ImageFormat::Jpeg { quality } => JpegEncoder::new_with_quality(&mut out, quality)
            .write_image(image.as_slice(), w, h, image::ExtendedColorType::Rgb8),
    };
    result.map_err(|e| unwritable(e.to_string()))?;
    use std::io::Write;
    out.flush().map_err(|e| unwritable(e.to_string()))
}

/// Encodes to PNG in memory.
pub fn encode_png(image: &Image<u8>) -> Result<Vec<u8>, RasterError> {
    let mut buf = Vec::new();
    PngEncoder::new(&mut buf)
        .write_image(
            image.as_slice(),
            image.width as u32,
            image.height as u32,
            image::ExtendedColorType::Rgb8,
        )
        .map_err(|e| RasterError::Unwritable {
            path: "<memory>".into(),
            reason: e.to_string(),
        })?;
    Ok(buf)
}
