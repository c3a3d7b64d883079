use rayon::prelude::*;

use crate::error::{MattingError, Result};
use crate::knn::{build_features, FeatureLayout, KnnIndex};
use crate::mixture::{mixture_endpoint_colors, solve_mixture_weights, split_combined_weights};
use crate::params::Params;
use crate::types::{region_masks, ImageRgb, Region, Rgb, Trimap};

/// Known-to-unknown estimate for one unknown pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KtoUEstimate {
    pub pixel: usize,
    /// Total weight of the foreground neighbors; an early alpha estimate.
    pub w_fg: f64,
    pub w_bg: f64,
    /// Confidence in `[0, 1]` from the separation of the endpoint colors.
    pub confidence: f64,
    pub fg_color: Option<Rgb>,
    pub bg_color: Option<Rgb>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KtoUResult {
    pub estimates: Vec<KtoUEstimate>,
}

impl KtoUResult {
    /// `w^F` over the full grid: the estimate on unknown pixels, 1 on F and 0 on B.
    pub fn fg_weights(&self, trimap: &Trimap) -> Vec<f64> {
        let mut w = trimap.known_alpha();
        for e in &self.estimates {
            w[e.pixel] = e.w_fg;
        }
        w
    }

    /// Confidences over the full grid, zero on known pixels.
    pub fn confidences(&self, n: usize) -> Vec<f64> {
        let mut eta = vec![0.0; n];
        for e in &self.estimates {
            eta[e.pixel] = e.confidence;
        }
        eta
    }
}

/// Confidence `|c_F - c_B|^2 / 3`, zero when either endpoint is undefined.
///
/// Negative mixture weights can push endpoint colors outside the unit cube, so the
/// value is clamped to `[0, 1]`.
pub fn ktou_confidence(fg: Option<Rgb>, bg: Option<Rgb>) -> f64 {
    match (fg, bg) {
        (Some(f), Some(b)) => {
            let d2: f64 = (0..3).map(|c| (f[c] - b[c]) * (f[c] - b[c])).sum();
            (d2 / 3.0).clamp(0.0, 1.0)
        }
        _ => 0.0,
    }
}

/// For each unknown pixel, fits its color jointly from its `k_ku` nearest foreground and
/// `k_ku` nearest background pixels (searched in `[r, g, b, 10x, 10y]`).
pub fn build_ktou_flow(image: &ImageRgb, trimap: &Trimap, params: &Params) -> Result<KtoUResult> {
    image.grid().ensure_same(trimap.grid())?;
    let masks = region_masks(trimap);
    if masks.foreground.is_empty() {
        return Err(MattingError::EmptyRegion("foreground (use the E2 system)"));
    }
    if masks.background.is_empty() {
        return Err(MattingError::EmptyRegion("background (use the E2 system)"));
    }
    let scale = params.ku_coord_scale;
    let fg_index = KnnIndex::new(
        &build_features(image, &masks.foreground, scale, FeatureLayout::Color, None)?,
        params.knn_mode,
    );
    let bg_index = KnnIndex::new(
        &build_features(image, &masks.background, scale, FeatureLayout::Color, None)?,
        params.knn_mode,
    );
    let queries = build_features(image, &masks.unknown, scale, FeatureLayout::Color, None)?;
    let colors = image.pixels();

    let estimates = queries
        .pixels()
        .par_iter()
        .enumerate()
        .map(|(i, &p)| {
            let q = queries.get(i);
            let fg = fg_index.query_pixels(q, params.k_ku, None)?;
            let bg = bg_index.query_pixels(q, params.k_ku, None)?;
            let fg_count = fg.len();
            let neighbor_colors: Vec<Rgb> = fg.iter().chain(&bg).map(|&n| colors[n]).collect();
            let weights = solve_mixture_weights(&colors[p], &neighbor_colors, params.lle_reg)?;
            let (w_fg, w_bg) = split_combined_weights(&weights, fg_count);
            let ends = mixture_endpoint_colors(&weights, &neighbor_colors, fg_count);
            Ok(KtoUEstimate {
                pixel: p,
                w_fg,
                w_bg,
                confidence: ktou_confidence(ends.foreground, ends.background),
                fg_color: ends.foreground,
                bg_color: ends.background,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    debug_assert!(estimates.iter().all(|e| trimap.label(e.pixel) == Region::Unknown));
    Ok(KtoUResult { estimates })
}
