//! Synthetic composites with known ground truth.

use crate::types::{ImageRgb, Matte, Region, Rgb, Trimap};

pub const RAMP_FOREGROUND: Rgb = [0.9, 0.2, 0.1];
pub const RAMP_BACKGROUND: Rgb = [0.1, 0.3, 0.8];

#[derive(Debug, Clone, PartialEq)]
pub struct Composite {
    pub image: ImageRgb,
    pub trimap: Trimap,
    pub alpha: Matte,
    pub foreground: Rgb,
    pub background: Rgb,
}

/// Flat `fg` over flat `bg` with a horizontal linear alpha ramp across a centred vertical
/// band of `band` columns. Opaque to the left, transparent to the right; the band is the
/// unknown region and its alphas lie strictly inside `(0, 1)`.
///
/// # Panics
/// If `band` is zero or not narrower than `width`.
pub fn ramp_composite(width: usize, height: usize, band: usize, fg: Rgb, bg: Rgb) -> Composite {
    assert!(
        band > 0 && band < width,
        "ramp band must be non-empty and narrower than the image"
    );
    let start = (width - band) / 2;
    let alpha = Matte::from_fn(width, height, |x, _| {
        if x < start {
            1.0
        } else if x >= start + band {
            0.0
        } else {
            1.0 - (x - start + 1) as f64 / (band + 1) as f64
        }
    });
    let image = ImageRgb::from_fn(width, height, |x, y| {
        let a = alpha.value(y * width + x);
        [0, 1, 2].map(|c| a * fg[c] + (1.0 - a) * bg[c])
    })
    .expect("convex combinations of unit colors stay in range");
    let trimap = Trimap::from_fn(width, height, |x, _| {
        if x < start {
            Region::Foreground
        } else if x >= start + band {
            Region::Background
        } else {
            Region::Unknown
        }
    });
    Composite {
        image,
        trimap,
        alpha,
        foreground: fg,
        background: bg,
    }
}

/// Mean absolute difference between two mattes over `pixels`.
pub fn mean_abs_error(a: &Matte, b: &Matte, pixels: &[usize]) -> f64 {
    if pixels.is_empty() {
        return 0.0;
    }
    pixels.iter().map(|&p| (a.value(p) - b.value(p)).abs()).sum::<f64>() / pixels.len() as f64
}
