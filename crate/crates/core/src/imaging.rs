//! 8-bit rasters, the binary PGM/PPM codec used for fixtures, and the resize
//! policy that feeds the network.

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error("truncated {0}")]
    Truncated(&'static str),
    #[error("unknown image format")]
    UnknownFormat,
    #[error("malformed header: {0}")]
    Header(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("decode: {0}")]
    Decode(String),
    #[error("invalid buffer: {0}")]
    InvalidBuffer(String),
}

/// Row-major `height × width × channels` raster; channels is 1 or 3.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageBuffer {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<u8>,
}

impl ImageBuffer {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<u8>) -> Result<Self, ImageError> {
        if height == 0 || width == 0 {
            return Err(ImageError::InvalidBuffer(format!("zero dimension {height}x{width}")));
        }
        if channels != 1 && channels != 3 {
            return Err(ImageError::InvalidBuffer(format!("{channels} channels")));
        }
        if data.len() != height * width * channels {
            return Err(ImageError::InvalidBuffer(format!(
                "{} bytes for {height}x{width}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    /// Image filled with a single value in every channel.
    pub fn filled(height: usize, width: usize, channels: usize, value: u8) -> Self {
        Self::new(height, width, channels, vec![value; height * width * channels.max(1)])
            .expect("filled: dimensions must be non-zero and channels 1 or 3")
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: u8) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    /// Rows `start..end` as a new image.
    pub fn crop_rows(&self, start: usize, end: usize) -> Self {
        let row = self.width * self.channels;
        Self {
            height: end - start,
            width: self.width,
            channels: self.channels,
            data: self.data[start * row..end * row].to_vec(),
        }
    }

    /// ITU-R 601 luma, rounded half-up. Gray images are returned unchanged.
    pub fn to_gray(&self) -> Self {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(3)
            .map(|p| {
                let y = 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64;
                (y + 0.5).floor().min(255.0) as u8
            })
            .collect();
        Self {
            height: self.height,
            width: self.width,
            channels: 1,
            data,
        }
    }

    pub fn to_rgb(&self) -> Self {
        if self.channels == 3 {
            return self.clone();
        }
        let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
        Self {
            height: self.height,
            width: self.width,
            channels: 3,
            data,
        }
    }

    pub fn with_channels(&self, channels: usize) -> Self {
        if channels == 1 {
            self.to_gray()
        } else {
            self.to_rgb()
        }
    }

    pub fn min_max(&self) -> (u8, u8) {
        self.data
            .iter()
            .fold((u8::MAX, u8::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

// ---------------------------------------------------------------- PGM / PPM

/// Encodes a binary PGM (1 channel) or PPM (3 channels), maxval 255.
pub fn encode_pnm(img: &ImageBuffer) -> Vec<u8> {
    let magic = if img.channels == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    out
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderReader<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c => self.pos += 1,
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize, ImageError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == self.bytes.len() {
            return Err(ImageError::Truncated("header"));
        }
        if start == self.pos {
            return Err(ImageError::Header(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| ImageError::Header(format!("{what} out of range")))
    }
}

pub fn decode_pnm(bytes: &[u8]) -> Result<ImageBuffer, ImageError> {
    if bytes.len() < 2 {
        return Err(ImageError::Truncated("header"));
    }
    let channels = match &bytes[..2] {
        b"P5" => 1,
        b"P6" => 3,
        _ => return Err(ImageError::UnknownFormat),
    };
    let mut r = HeaderReader { bytes, pos: 2 };
    let width = r.number("width")?;
    let height = r.number("height")?;
    let maxval = r.number("maxval")?;
    if maxval != 255 {
        return Err(ImageError::Unsupported(format!("maxval {maxval}")));
    }
    if width == 0 || height == 0 {
        return Err(ImageError::Header(format!("zero dimension {width}x{height}")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if !bytes[r.pos].is_ascii_whitespace() {
        return Err(ImageError::Header("expected whitespace after maxval".into()));
    }
    let start = r.pos + 1;
    let len = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| ImageError::Header("dimensions overflow".into()))?;
    if bytes.len() < start + len {
        return Err(ImageError::Truncated("raster"));
    }
    ImageBuffer::new(height, width, channels, bytes[start..start + len].to_vec())
}

fn is_pnm_ext(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("pgm" | "ppm" | "pnm")
    )
}

/// Decodes PGM/PPM bit-exactly and PNG/JPEG through the `image` crate.
/// Gray(+alpha) inputs load as 1 channel, everything else as RGB.
pub fn decode_image(bytes: &[u8]) -> Result<ImageBuffer, ImageError> {
    if bytes.len() >= 2 && bytes[0] == b'P' && (bytes[1] == b'5' || bytes[1] == b'6') {
        return decode_pnm(bytes);
    }
    if bytes.len() < 2 {
        return Err(ImageError::Truncated("header"));
    }
    let format = image::guess_format(bytes).map_err(|_| ImageError::UnknownFormat)?;
    let dynimg = image::load_from_memory_with_format(bytes, format).map_err(|e| ImageError::Decode(e.to_string()))?;
    let (w, h) = (dynimg.width() as usize, dynimg.height() as usize);
    if dynimg.color().has_color() {
        ImageBuffer::new(h, w, 3, dynimg.into_rgb8().into_raw())
    } else {
        ImageBuffer::new(h, w, 1, dynimg.into_luma8().into_raw())
    }
}

pub fn load_image(path: &Path) -> Result<ImageBuffer, ImageError> {
    decode_image(&fs::read(path)?)
}

/// Writes by extension: `.pgm`/`.ppm`/`.pnm` as binary PNM, `.png` and
/// `.jpg`/`.jpeg` through the `image` crate.
pub fn save_image(img: &ImageBuffer, path: &Path) -> Result<(), ImageError> {
    if is_pnm_ext(path) {
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
        let img = match ext.as_str() {
            "pgm" => img.to_gray(),
            "ppm" => img.to_rgb(),
            _ => img.clone(),
        };
        fs::write(path, encode_pnm(&img))?;
        return Ok(());
    }
    let color = if img.channels == 1 {
        image::ExtendedColorType::L8
    } else {
        image::ExtendedColorType::Rgb8
    };
    image::save_buffer(path, &img.data, img.width as u32, img.height as u32, color)
        .map_err(|e| ImageError::Decode(e.to_string()))
}

// ------------------------------------------------------------------ resize

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResizePolicy {
    /// Resample to exactly the target size.
    Stretch,
    /// Scale to the target height keeping aspect, zero-pad on the right;
    /// stretch the width only when the scaled image would not fit.
    #[default]
    PadRight,
}

/// Per-output-coordinate source taps for half-pixel-centred bilinear
/// sampling: `(lo, hi, weight_of_hi)`.
fn taps(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let lo = s.floor() as usize;
            let hi = (lo + 1).min(src - 1);
            (lo, hi, s - lo as f64)
        })
        .collect()
}

/// Bilinear resample to `height × width`, half-pixel centres, clamped edges,
/// rounded to nearest.
pub fn resize_bilinear(img: &ImageBuffer, height: usize, width: usize) -> ImageBuffer {
    if height == img.height && width == img.width {
        return img.clone();
    }
    let ch = img.channels;
    let ys = taps(img.height, height);
    let xs = taps(img.width, width);
    let mut data = vec![0u8; height * width * ch];
    for (oy, &(y0, y1, fy)) in ys.iter().enumerate() {
        for (ox, &(x0, x1, fx)) in xs.iter().enumerate() {
            for c in 0..ch {
                let p00 = img.get(y0, x0, c) as f64;
                let p01 = img.get(y0, x1, c) as f64;
                let p10 = img.get(y1, x0, c) as f64;
                let p11 = img.get(y1, x1, c) as f64;
                let top = p00 + (p01 - p00) * fx;
                let bot = p10 + (p11 - p10) * fx;
                let v = top + (bot - top) * fy;
                data[(oy * width + ox) * ch + c] = v.round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    ImageBuffer {
        height,
        width,
        channels: ch,
        data,
    }
}

pub fn resize_to(img: &ImageBuffer, target_h: usize, target_w: usize, policy: ResizePolicy) -> ImageBuffer {
    assert!(target_h >= 1 && target_w >= 1, "resize target must be at least 1x1");
    match policy {
        ResizePolicy::Stretch => resize_bilinear(img, target_h, target_w),
        ResizePolicy::PadRight => {
            let scaled_w = ((img.width as f64 * target_h as f64 / img.height as f64).round() as usize).max(1);
            if scaled_w > target_w {
                return resize_bilinear(img, target_h, target_w);
            }
            let scaled = resize_bilinear(img, target_h, scaled_w);
            if scaled_w == target_w {
                return scaled;
            }
            let ch = img.channels;
            let mut out = ImageBuffer::filled(target_h, target_w, ch, 0);
            let src_row = scaled_w * ch;
            let dst_row = target_w * ch;
            for y in 0..target_h {
                out.data[y * dst_row..y * dst_row + src_row]
                    .copy_from_slice(&scaled.data[y * src_row..(y + 1) * src_row]);
            }
            out
        }
    }
}
