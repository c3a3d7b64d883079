use crate::error::{MattingError, Result};
use crate::params::Params;
use crate::types::{region_masks, ImageRgb, Region, Trimap};

/// Least-squares fit of the unknown-region histogram by the two known-region histograms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramFit {
    pub a: f64,
    pub b: f64,
    /// Residual `|a D_F + b D_B - D_U|^2`.
    pub e: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransparencyDecision {
    pub fit: HistogramFit,
    /// True when the residual exceeds the threshold, i.e. a highly transparent matte is expected.
    pub use_e2: bool,
}

/// L1-normalized joint RGB histogram with `bins` bins per channel.
pub fn color_histogram(image: &ImageRgb, pixels: &[usize], bins: usize) -> Vec<f64> {
    let mut hist = vec![0.0; bins * bins * bins];
    let bin = |v: f64| ((v * bins as f64) as usize).min(bins - 1);
    for &p in pixels {
        let c = image.pixel(p);
        hist[(bin(c[0]) * bins + bin(c[1])) * bins + bin(c[2])] += 1.0;
    }
    if !pixels.is_empty() {
        let n = pixels.len() as f64;
        hist.iter_mut().for_each(|h| *h /= n);
    }
    hist
}

/// Solves `min_{a,b} |a f + b g - u|^2` through the 2x2 normal equations.
///
/// Parallel or vanishing `f`, `g` make the normal matrix singular; it then gets `1e-8 I`.
pub fn fit_histogram_mixture(f: &[f64], g: &[f64], u: &[f64]) -> HistogramFit {
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
    let (ff, fg, gg) = (dot(f, f), dot(f, g), dot(g, g));
    let (fu, gu) = (dot(f, u), dot(g, u));
    let mut m = [[ff, fg], [fg, gg]];
    let mut det = m[0][0] * m[1][1] - m[0][1] * m[0][1];
    if det <= 1e-12 * (ff * gg).max(f64::MIN_POSITIVE) {
        m[0][0] += 1e-8;
        m[1][1] += 1e-8;
        det = m[0][0] * m[1][1] - m[0][1] * m[0][1];
    }
    let a = (m[1][1] * fu - m[0][1] * gu) / det;
    let b = (m[0][0] * gu - m[0][1] * fu) / det;
    let e = f
        .iter()
        .zip(g)
        .zip(u)
        .map(|((fi, gi), ui)| {
            let r = a * fi + b * gi - ui;
            r * r
        })
        .sum();
    HistogramFit { a, b, e }
}

/// Chessboard distance from every pixel to the nearest unknown pixel.
fn distance_to_unknown(trimap: &Trimap) -> Vec<usize> {
    let (w, h) = (trimap.width(), trimap.height());
    let far = w + h;
    let mut d: Vec<usize> = trimap
        .labels()
        .iter()
        .map(|r| if *r == Region::Unknown { 0 } else { far })
        .collect();
    for y in 0..h {
        for x in 0..w {
            let mut best = d[y * w + x];
            for (dx, dy) in [(-1isize, -1isize), (0, -1), (1, -1), (-1, 0)] {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx >= 0 && ny >= 0 && (nx as usize) < w {
                    best = best.min(d[ny as usize * w + nx as usize] + 1);
                }
            }
            d[y * w + x] = best;
        }
    }
    for y in (0..h).rev() {
        for x in (0..w).rev() {
            let mut best = d[y * w + x];
            for (dx, dy) in [(1isize, 1isize), (0, 1), (-1, 1), (1, 0)] {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx >= 0 && (nx as usize) < w && (ny as usize) < h {
                    best = best.min(d[ny as usize * w + nx as usize] + 1);
                }
            }
            d[y * w + x] = best;
        }
    }
    d
}

/// Expresses the unknown-region histogram as a combination of the histograms of the
/// `hist_band`-pixel bands of F and B around the unknown region.
pub fn classify_transparency(image: &ImageRgb, trimap: &Trimap, params: &Params) -> Result<TransparencyDecision> {
    image.grid().ensure_same(trimap.grid())?;
    let masks = region_masks(trimap);
    if masks.foreground.is_empty() {
        return Err(MattingError::EmptyRegion("foreground"));
    }
    if masks.background.is_empty() {
        return Err(MattingError::EmptyRegion("background"));
    }
    let dist = distance_to_unknown(trimap);
    let band = |pixels: &[usize]| {
        let near: Vec<usize> = pixels
            .iter()
            .copied()
            .filter(|&p| dist[p] <= params.hist_band)
            .collect();
        if near.is_empty() {
            pixels.to_vec()
        } else {
            near
        }
    };
    let bins = params.hist_bins;
    let df = color_histogram(image, &band(&masks.foreground), bins);
    let db = color_histogram(image, &band(&masks.background), bins);
    let du = color_histogram(image, &masks.unknown, bins);
    let fit = fit_histogram_mixture(&df, &db, &du);
    Ok(TransparencyDecision {
        fit,
        use_e2: fit.e > params.transparency_threshold,
    })
}
