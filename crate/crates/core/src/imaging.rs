//! Gray-scale rasters, binary PGM I/O, and the per-pixel quantities used by
//! feature extraction (normalized brightness, gradients, histograms).

use std::fmt;

use thiserror::Error;

/// Number of intensity levels in an 8-bit raster.
pub const LEVELS: usize = 256;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ImageError {
    #[error("bad PGM magic (expected P5)")]
    BadMagic,
    #[error("malformed PGM header: {0}")]
    BadHeader(String),
    #[error("unsupported maxval {0} (only 255 is supported)")]
    MaxvalUnsupported(u32),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("image dimensions must be positive, got {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },
    #[error("sample buffer has {found} entries, expected {expected}")]
    SampleCount { expected: usize, found: usize },
    #[error("rect {rect} does not fit in a {width}x{height} image")]
    OutOfBounds {
        rect: Rect,
        width: usize,
        height: usize,
    },
}

/// Axis-aligned pixel box covering columns `x..x+w` and rows `y..y+h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    /// Panics if `w` or `h` is zero.
    pub fn new(x: usize, y: usize, w: usize, h: usize) -> Rect {
        assert!(w >= 1 && h >= 1, "rect must be at least 1x1");
        Rect { x, y, w, h }
    }

    pub fn square(x: usize, y: usize, size: usize) -> Rect {
        Rect::new(x, y, size, size)
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }

    pub fn right(&self) -> usize {
        self.x + self.w
    }

    pub fn bottom(&self) -> usize {
        self.y + self.h
    }

    pub fn fits_in(&self, width: usize, height: usize) -> bool {
        self.right() <= width && self.bottom() <= height
    }
}

impl fmt::Display for Rect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}x{})", self.x, self.y, self.w, self.h)
    }
}

/// Row-major 8-bit gray-scale raster with a top-left origin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    samples: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, samples: Vec<u8>) -> Result<GrayImage, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::InvalidDimensions { width, height });
        }
        if samples.len() != width * height {
            return Err(ImageError::SampleCount {
                expected: width * height,
                found: samples.len(),
            });
        }
        Ok(GrayImage {
            width,
            height,
            samples,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<GrayImage, ImageError> {
        GrayImage::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> u8,
    ) -> Result<GrayImage, ImageError> {
        let mut samples = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                samples.push(f(x, y));
            }
        }
        GrayImage::new(width, height, samples)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    /// Sample at column `x`, row `y`.
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.samples[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.samples[y * self.width + x] = value;
    }

    pub fn check_rect(&self, roi: Rect) -> Result<(), ImageError> {
        if roi.fits_in(self.width, self.height) {
            Ok(())
        } else {
            Err(ImageError::OutOfBounds {
                rect: roi,
                width: self.width,
                height: self.height,
            })
        }
    }

    pub fn crop(&self, roi: Rect) -> Result<GrayImage, ImageError> {
        self.check_rect(roi)?;
        let mut samples = Vec::with_capacity(roi.area());
        for y in roi.y..roi.bottom() {
            let row = y * self.width;
            samples.extend_from_slice(&self.samples[row + roi.x..row + roi.right()]);
        }
        GrayImage::new(roi.w, roi.h, samples)
    }

    /// Swaps rows and columns.
    pub fn transpose(&self) -> GrayImage {
        GrayImage::from_fn(self.height, self.width, |x, y| self.get(y, x))
            .expect("transpose preserves validity")
    }

    /// Decodes a binary (P5) PGM with maxval 255.
    pub fn load_pgm(bytes: &[u8]) -> Result<GrayImage, ImageError> {
        let mut cursor = HeaderCursor { bytes, pos: 0 };
        if cursor.token()? != b"P5" {
            return Err(ImageError::BadMagic);
        }
        let width = cursor.number("width")?;
        let height = cursor.number("height")?;
        let maxval = cursor.number("maxval")?;
        if width == 0 || height == 0 {
            return Err(ImageError::InvalidDimensions {
                width: width as usize,
                height: height as usize,
            });
        }
        if maxval != 255 {
            return Err(ImageError::MaxvalUnsupported(maxval));
        }
        // Exactly one whitespace byte separates the header from the raster.
        match bytes.get(cursor.pos) {
            Some(b) if b.is_ascii_whitespace() => cursor.pos += 1,
            _ => return Err(ImageError::BadHeader("missing separator after maxval".into())),
        }
        let (width, height) = (width as usize, height as usize);
        let expected = width * height;
        let payload = &bytes[cursor.pos..];
        if payload.len() < expected {
            return Err(ImageError::TruncatedPayload {
                expected,
                found: payload.len(),
            });
        }
        GrayImage::new(width, height, payload[..expected].to_vec())
    }

    /// Encodes as `P5\n<width> <height>\n255\n` followed by the raw samples.
    pub fn save_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.samples);
        out
    }
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderCursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<&'a [u8], ImageError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() || b == b'#' {
                break;
            }
            self.pos += 1;
        }
        if start == self.pos {
            return Err(ImageError::BadHeader("unexpected end of header".into()));
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<u32, ImageError> {
        let tok = self.token()?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<u32>().ok())
            .ok_or_else(|| ImageError::BadHeader(format!("invalid {what}")))
    }
}

/// Maps an 8-bit sample onto the unit interval.
#[inline]
pub fn normalize(sample: u8) -> f64 {
    f64::from(sample) / 255.0
}

/// Per-pixel gradient magnitude and direction over normalized brightness.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    width: usize,
    height: usize,
    magnitudes: Vec<f64>,
    directions: Vec<f64>,
}

impl GradientField {
    /// Central differences with replicated borders: `dx = (I(x+1) - I(x-1)) / 2`
    /// on brightness in `[0, 1]`. Direction is `atan2(dy, dx)`, pinned to 0
    /// where the magnitude vanishes.
    pub fn compute(img: &GrayImage) -> GradientField {
        let (w, h) = (img.width(), img.height());
        let mut magnitudes = Vec::with_capacity(w * h);
        let mut directions = Vec::with_capacity(w * h);
        for y in 0..h {
            let up = y.saturating_sub(1);
            let down = (y + 1).min(h - 1);
            for x in 0..w {
                let left = x.saturating_sub(1);
                let right = (x + 1).min(w - 1);
                let dx = (normalize(img.get(right, y)) - normalize(img.get(left, y))) / 2.0;
                let dy = (normalize(img.get(x, down)) - normalize(img.get(x, up))) / 2.0;
                let mag = (dx * dx + dy * dy).sqrt();
                magnitudes.push(mag);
                let dir = match dy.atan2(dx) {
                    _ if mag == 0.0 => 0.0,
                    d if d == -std::f64::consts::PI => std::f64::consts::PI,
                    d => d,
                };
                directions.push(dir);
            }
        }
        GradientField {
            width: w,
            height: h,
            magnitudes,
            directions,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn magnitude(&self, x: usize, y: usize) -> f64 {
        self.magnitudes[y * self.width + x]
    }

    pub fn direction(&self, x: usize, y: usize) -> f64 {
        self.directions[y * self.width + x]
    }

    pub fn magnitudes(&self) -> &[f64] {
        &self.magnitudes
    }

    pub fn directions(&self) -> &[f64] {
        &self.directions
    }
}

/// Fraction of ROI pixels at each raw intensity level.
pub fn intensity_histogram(img: &GrayImage, roi: Rect) -> Result<[f64; LEVELS], ImageError> {
    img.check_rect(roi)?;
    let mut counts = [0usize; LEVELS];
    for y in roi.y..roi.bottom() {
        for x in roi.x..roi.right() {
            counts[img.get(x, y) as usize] += 1;
        }
    }
    let total = roi.area() as f64;
    let mut bins = [0.0; LEVELS];
    for (bin, &count) in bins.iter_mut().zip(counts.iter()) {
        *bin = count as f64 / total;
    }
    Ok(bins)
}
