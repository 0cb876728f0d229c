//! Pixel-buffer preprocessing: letterboxing onto a black square canvas and
//! the four training augmentations (flip, jitter, grayscale, blur).
//!
//! All operations are pure functions of their inputs plus an injected RNG.

mod augment;
mod letterbox;
mod ppm;

use thiserror::Error;

pub use augment::{
    apply_jitter, augment, color_jitter, gaussian_blur, gaussian_kernel, grayscale, hflip,
    AugmentConfig, JitterFactors, JitterRanges, LUMA_WEIGHTS,
};
pub use letterbox::{letterbox, letterbox_placement, Placement};
pub use ppm::{decode_ppm, encode_ppm, read_ppm, write_ppm};

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("image has zero width or height")]
    ZeroSized,
    #[error("pixel buffer has {found} bytes, expected {expected}")]
    BufferLength { expected: usize, found: usize },
    #[error("canvas side must be at least 1")]
    ZeroSide,
    #[error("blur sigma must be finite and positive, got {0}")]
    InvalidSigma(f64),
    #[error("jitter range {0} must lie in [0, 1)")]
    InvalidJitter(f64),
    #[error("probability {0} must lie in [0, 1]")]
    InvalidProbability(f64),
    #[error("PPM: {0}")]
    Ppm(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = ImageError> = std::result::Result<T, E>;

/// Row-major interleaved RGB, 8 bits per channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(ImageError::ZeroSized);
        }
        let expected = width * height * 3;
        if pixels.len() != expected {
            return Err(ImageError::BufferLength {
                expected,
                found: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Image filled with one colour.
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        let pixels = rgb
            .iter()
            .copied()
            .cycle()
            .take(width * height * 3)
            .collect();
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub(crate) fn from_parts_unchecked(width: usize, height: usize, pixels: Vec<u8>) -> Self {
        debug_assert_eq!(pixels.len(), width * height * 3);
        Self {
            width,
            height,
            pixels,
        }
    }
}

/// Square `side × side × 3` tensor with channel values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorImage {
    side: usize,
    data: Vec<f64>,
}

impl TensorImage {
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.side + x) * 3 + c]
    }

    /// Quantizes back to 8-bit RGB.
    pub fn to_image(&self) -> ImageBuffer {
        let pixels = self
            .data
            .iter()
            .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect();
        ImageBuffer::from_parts_unchecked(self.side, self.side, pixels)
    }
}
