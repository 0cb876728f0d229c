use super::{ImageBuffer, ImageError, Result, TensorImage};

/// Where the scaled content sits on the canvas.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Placement {
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
}

/// Content rectangle for a `width × height` image on a `side` canvas:
/// scale to the long side, round the short side, center (floor on odd slack).
pub fn letterbox_placement(width: usize, height: usize, side: usize) -> Placement {
    let scale = side as f64 / width.max(height) as f64;
    let w = ((width as f64 * scale).round() as usize).clamp(1, side);
    let h = ((height as f64 * scale).round() as usize).clamp(1, side);
    Placement {
        x0: (side - w) / 2,
        y0: (side - h) / 2,
        width: w,
        height: h,
    }
}

/// Source sample position for destination pixel `dst` on a `src_len → dst_len`
/// resize, half-pixel centers, clamped to the source. Returns (low, high, frac).
#[inline]
fn sample_axis(dst: usize, src_len: usize, dst_len: usize) -> (usize, usize, f64) {
    let pos = (dst as f64 + 0.5) * src_len as f64 / dst_len as f64 - 0.5;
    let pos = pos.clamp(0.0, (src_len - 1) as f64);
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(src_len - 1);
    (lo, hi, pos - lo as f64)
}

/// Scales `img` to fit a black `side × side` canvas with bilinear interpolation,
/// preserving aspect ratio. Output channels are in `[0, 1]`; padding is exactly 0.
pub fn letterbox(img: &ImageBuffer, side: usize) -> Result<TensorImage> {
    if side == 0 {
        return Err(ImageError::ZeroSide);
    }
    if img.width() == 0 || img.height() == 0 {
        return Err(ImageError::ZeroSized);
    }
    let p = letterbox_placement(img.width(), img.height(), side);
    let mut data = vec![0.0; side * side * 3];
    let cols: Vec<_> = (0..p.width)
        .map(|x| sample_axis(x, img.width(), p.width))
        .collect();
    for y in 0..p.height {
        let (y0, y1, fy) = sample_axis(y, img.height(), p.height);
        for (x, &(x0, x1, fx)) in cols.iter().enumerate() {
            let a = img.pixel(x0, y0);
            let b = img.pixel(x1, y0);
            let c = img.pixel(x0, y1);
            let d = img.pixel(x1, y1);
            let out = ((p.y0 + y) * side + p.x0 + x) * 3;
            for ch in 0..3 {
                let top = f64::from(a[ch]) * (1.0 - fx) + f64::from(b[ch]) * fx;
                let bottom = f64::from(c[ch]) * (1.0 - fx) + f64::from(d[ch]) * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                data[out + ch] = (v / 255.0).clamp(0.0, 1.0);
            }
        }
    }
    Ok(TensorImage { side, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wide_image_gets_horizontal_bands() {
        let img = ImageBuffer::filled(100, 50, [255, 255, 255]).unwrap();
        let p = letterbox_placement(100, 50, 224);
        assert_eq!(
            p,
            Placement {
                x0: 0,
                y0: 56,
                width: 224,
                height: 112
            }
        );

        let t = letterbox(&img, 224).unwrap();
        for y in 0..224 {
            let inside = (56..168).contains(&y);
            for x in [0, 100, 223] {
                for c in 0..3 {
                    assert_eq!(t.at(x, y, c), if inside { 1.0 } else { 0.0 }, "({x},{y})");
                }
            }
        }
    }

    #[test]
    fn square_input_fills_canvas_unchanged() {
        let pixels: Vec<u8> = (0..8 * 8 * 3).map(|i| (i * 7 % 256) as u8).collect();
        let img = ImageBuffer::new(8, 8, pixels.clone()).unwrap();
        let t = letterbox(&img, 8).unwrap();
        assert_eq!(t.to_image().pixels(), &pixels[..]);
    }

    #[test]
    fn single_white_pixel_spreads_over_canvas() {
        // Every bilinear tap clamps to the one source pixel, so all weight lands on 1.0.
        let img = ImageBuffer::filled(1, 1, [255, 255, 255]).unwrap();
        let t = letterbox(&img, 4).unwrap();
        assert!(t.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn tall_image_hand_computed_bilinear() {
        // 1×2 column (black over white) → side 4: content 2×4 at x0=1.
        let img = ImageBuffer::new(1, 2, vec![0, 0, 0, 255, 255, 255]).unwrap();
        let t = letterbox(&img, 4).unwrap();
        // dst rows map to source y = (y+0.5)/2 - 0.5 = -0.25, 0.25, 0.75, 1.25 (clamped to [0,1]).
        let expected = [0.0, 0.25, 0.75, 1.0];
        for (y, &e) in expected.iter().enumerate() {
            for x in 1..3 {
                assert!((t.at(x, y, 0) - e).abs() < 1e-15);
            }
            assert_eq!(t.at(0, y, 0), 0.0);
            assert_eq!(t.at(3, y, 0), 0.0);
        }
    }

    #[test]
    fn zero_side_rejected() {
        let img = ImageBuffer::filled(2, 2, [0, 0, 0]).unwrap();
        assert!(matches!(letterbox(&img, 0), Err(ImageError::ZeroSide)));
    }

    proptest! {
        #[test]
        fn aspect_ratio_within_one_pixel(w in 1usize..400, h in 1usize..400, side in 1usize..400) {
            let p = letterbox_placement(w, h, side);
            prop_assert!(p.x0 + p.width <= side && p.y0 + p.height <= side);
            let scale = side as f64 / w.max(h) as f64;
            prop_assert!((p.width as f64 - w as f64 * scale).abs() <= 1.0);
            prop_assert!((p.height as f64 - h as f64 * scale).abs() <= 1.0);
            prop_assert!(p.width == side || p.height == side);
        }
    }
}
