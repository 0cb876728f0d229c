use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ImageBuffer, ImageError, Result};

/// ITU-R BT.601 luma weights.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

#[inline]
fn luma(p: [f64; 3]) -> f64 {
    LUMA_WEIGHTS[0] * p[0] + LUMA_WEIGHTS[1] * p[1] + LUMA_WEIGHTS[2] * p[2]
}

#[inline]
fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

pub fn hflip(img: &ImageBuffer) -> ImageBuffer {
    let (w, h) = (img.width(), img.height());
    let mut out = Vec::with_capacity(img.pixels().len());
    for row in img.pixels().chunks_exact(w * 3) {
        for px in row.chunks_exact(3).rev() {
            out.extend_from_slice(px);
        }
    }
    ImageBuffer::from_parts_unchecked(w, h, out)
}

/// Replaces each pixel with its luma, replicated to all three channels.
pub fn grayscale(img: &ImageBuffer) -> ImageBuffer {
    let mut out = Vec::with_capacity(img.pixels().len());
    for px in img.pixels().chunks_exact(3) {
        let g = quantize(luma([px[0].into(), px[1].into(), px[2].into()]));
        out.extend_from_slice(&[g, g, g]);
    }
    ImageBuffer::from_parts_unchecked(img.width(), img.height(), out)
}

/// Half-widths of the uniform multiplicative jitter ranges, e.g. 0.2 → [0.8, 1.2].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JitterRanges {
    pub brightness: f64,
    pub contrast: f64,
    pub saturation: f64,
}

impl Default for JitterRanges {
    fn default() -> Self {
        Self {
            brightness: 0.2,
            contrast: 0.2,
            saturation: 0.2,
        }
    }
}

impl JitterRanges {
    fn check(&self) -> Result<()> {
        for r in [self.brightness, self.contrast, self.saturation] {
            if !(0.0..1.0).contains(&r) {
                return Err(ImageError::InvalidJitter(r));
            }
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<JitterFactors> {
        self.check()?;
        let mut draw = |r: f64| {
            if r == 0.0 {
                1.0
            } else {
                rng.random_range(1.0 - r..=1.0 + r)
            }
        };
        Ok(JitterFactors {
            brightness: draw(self.brightness),
            contrast: draw(self.contrast),
            saturation: draw(self.saturation),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JitterFactors {
    pub brightness: f64,
    pub contrast: f64,
    pub saturation: f64,
}

/// Applies brightness, then contrast (about the mean luma), then saturation
/// (about each pixel's luma). Rounds once at the end.
pub fn apply_jitter(img: &ImageBuffer, f: JitterFactors) -> ImageBuffer {
    let mut px: Vec<[f64; 3]> = img
        .pixels()
        .chunks_exact(3)
        .map(|p| {
            [
                f64::from(p[0]) * f.brightness,
                f64::from(p[1]) * f.brightness,
                f64::from(p[2]) * f.brightness,
            ]
        })
        .map(|p| p.map(|v| v.clamp(0.0, 255.0)))
        .collect();

    let mean =
        crate::linalg::sum(&px.iter().map(|&p| luma(p)).collect::<Vec<_>>()) / px.len() as f64;
    for p in &mut px {
        *p = p.map(|v| ((v - mean) * f.contrast + mean).clamp(0.0, 255.0));
    }
    for p in &mut px {
        let g = luma(*p);
        *p = p.map(|v| (g + (v - g) * f.saturation).clamp(0.0, 255.0));
    }
    let out = px.iter().flat_map(|p| p.map(quantize)).collect();
    ImageBuffer::from_parts_unchecked(img.width(), img.height(), out)
}

pub fn color_jitter<R: Rng + ?Sized>(
    img: &ImageBuffer,
    ranges: &JitterRanges,
    rng: &mut R,
) -> Result<ImageBuffer> {
    let f = ranges.sample(rng)?;
    Ok(apply_jitter(img, f))
}

/// Normalized 1-D Gaussian kernel truncated at `ceil(3σ)`.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f64>> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(ImageError::InvalidSigma(sigma));
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let raw: Vec<f64> = (-radius..=radius)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total = crate::linalg::sum(&raw);
    Ok(raw.into_iter().map(|w| w / total).collect())
}

/// Separable Gaussian blur with edge clamping.
pub fn gaussian_blur(img: &ImageBuffer, sigma: f64) -> Result<ImageBuffer> {
    let kernel = gaussian_kernel(sigma)?;
    let r = (kernel.len() / 2) as i64;
    let (w, h) = (img.width() as i64, img.height() as i64);
    let src = img.pixels();

    let mut horiz = vec![0.0f64; src.len()];
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                let mut acc = 0.0;
                for (k, &wt) in kernel.iter().enumerate() {
                    let sx = (x + k as i64 - r).clamp(0, w - 1);
                    acc += wt * f64::from(src[((y * w + sx) * 3) as usize + c]);
                }
                horiz[((y * w + x) * 3) as usize + c] = acc;
            }
        }
    }
    let mut out = vec![0u8; src.len()];
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                let mut acc = 0.0;
                for (k, &wt) in kernel.iter().enumerate() {
                    let sy = (y + k as i64 - r).clamp(0, h - 1);
                    acc += wt * horiz[((sy * w + x) * 3) as usize + c];
                }
                out[((y * w + x) * 3) as usize + c] = quantize(acc);
            }
        }
    }
    Ok(ImageBuffer::from_parts_unchecked(
        img.width(),
        img.height(),
        out,
    ))
}

/// Probabilities and ranges for the random training augmentation chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub flip_prob: f64,
    pub jitter_prob: f64,
    pub jitter: JitterRanges,
    pub grayscale_prob: f64,
    pub blur_prob: f64,
    pub blur_sigma: (f64, f64),
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            flip_prob: 0.5,
            jitter_prob: 0.8,
            jitter: JitterRanges::default(),
            grayscale_prob: 0.2,
            blur_prob: 0.5,
            blur_sigma: (0.1, 2.0),
        }
    }
}

/// Random flip → jitter → grayscale → blur, each gated by its probability.
/// The RNG is consumed in a fixed pattern so the same seed gives the same bytes.
pub fn augment<R: Rng + ?Sized>(
    img: &ImageBuffer,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Result<ImageBuffer> {
    for p in [
        cfg.flip_prob,
        cfg.jitter_prob,
        cfg.grayscale_prob,
        cfg.blur_prob,
    ] {
        if !(0.0..=1.0).contains(&p) {
            return Err(ImageError::InvalidProbability(p));
        }
    }
    let (lo, hi) = cfg.blur_sigma;
    if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
        return Err(ImageError::InvalidSigma(lo));
    }
    let mut out = img.clone();
    if rng.random_bool(cfg.flip_prob) {
        out = hflip(&out);
    }
    let factors = cfg.jitter.sample(rng)?;
    if rng.random_bool(cfg.jitter_prob) {
        out = apply_jitter(&out, factors);
    }
    if rng.random_bool(cfg.grayscale_prob) {
        out = grayscale(&out);
    }
    let sigma = rng.random_range(lo..=hi);
    if rng.random_bool(cfg.blur_prob) {
        out = gaussian_blur(&out, sigma)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn arb_image() -> impl Strategy<Value = ImageBuffer> {
        (1usize..12, 1usize..12).prop_flat_map(|(w, h)| {
            proptest::collection::vec(any::<u8>(), w * h * 3)
                .prop_map(move |px| ImageBuffer::new(w, h, px).unwrap())
        })
    }

    #[test]
    fn hflip_moves_columns() {
        let img = ImageBuffer::new(2, 1, vec![1, 2, 3, 4, 5, 6]).unwrap();
        assert_eq!(hflip(&img).pixels(), &[4, 5, 6, 1, 2, 3]);
    }

    #[test]
    fn grayscale_fixes_gray_images() {
        for v in [0u8, 1, 77, 128, 254, 255] {
            let img = ImageBuffer::filled(3, 2, [v, v, v]).unwrap();
            assert_eq!(grayscale(&img), img);
        }
        let red = ImageBuffer::filled(1, 1, [255, 0, 0]).unwrap();
        assert_eq!(grayscale(&red).pixels(), &[76, 76, 76]);
    }

    #[test]
    fn blur_keeps_constant_images() {
        let img = ImageBuffer::filled(9, 5, [13, 200, 255]).unwrap();
        for sigma in [0.3, 1.0, 2.5] {
            assert_eq!(gaussian_blur(&img, sigma).unwrap(), img);
        }
    }

    #[test]
    fn kernel_is_normalized_and_truncated() {
        for sigma in [0.1, 0.5, 1.0, 3.7] {
            let k = gaussian_kernel(sigma).unwrap();
            assert_eq!(k.len(), 2 * (3.0 * sigma).ceil() as usize + 1);
            assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(matches!(
            gaussian_kernel(0.0),
            Err(ImageError::InvalidSigma(_))
        ));
        assert!(matches!(
            gaussian_kernel(f64::NAN),
            Err(ImageError::InvalidSigma(_))
        ));
    }

    #[test]
    fn identity_jitter_is_noop() {
        let img = ImageBuffer::new(2, 1, vec![10, 20, 30, 200, 100, 0]).unwrap();
        let one = JitterFactors {
            brightness: 1.0,
            contrast: 1.0,
            saturation: 1.0,
        };
        assert_eq!(apply_jitter(&img, one), img);
        let dark = apply_jitter(
            &img,
            JitterFactors {
                brightness: 0.5,
                ..one
            },
        );
        assert_eq!(dark.pixels(), &[5, 10, 15, 100, 50, 0]);
    }

    #[test]
    fn jitter_range_validation() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let img = ImageBuffer::filled(1, 1, [1, 1, 1]).unwrap();
        let bad = JitterRanges {
            brightness: 1.5,
            ..Default::default()
        };
        assert!(color_jitter(&img, &bad, &mut rng).is_err());
        let f = JitterRanges::default().sample(&mut rng).unwrap();
        assert!((0.8..=1.2).contains(&f.brightness));
    }

    proptest! {
        #[test]
        fn hflip_is_an_involution(img in arb_image()) {
            prop_assert_eq!(hflip(&hflip(&img)), img);
        }

        #[test]
        fn augment_is_seed_deterministic(img in arb_image(), seed in any::<u64>()) {
            let cfg = AugmentConfig::default();
            let a = augment(&img, &cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let b = augment(&img, &cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            prop_assert_eq!(a.width(), img.width());
            prop_assert_eq!(a, b);
        }
    }
}
