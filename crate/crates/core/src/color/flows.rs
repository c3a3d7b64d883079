use rayon::prelude::*;

use super::gradients::{compute_gradients, GradientField};
use super::AlphaRegions;
use crate::error::{MattingError, Result};
use crate::flows::{mixture_graph, similarity_graph};
use crate::knn::{build_features, FeatureLayout, KnnIndex};
use crate::params::Params;
use crate::types::{FlowGraph, ImageRgb, Matte, Region};

/// Unit vector from a pixel towards its neighbor at offset `(dx, dy)`.
#[inline]
pub fn unit_offset(dx: isize, dy: isize) -> [f64; 2] {
    let len = ((dx * dx + dy * dy) as f64).sqrt();
    [dx as f64 / len, dy as f64 / len]
}

/// Alpha-transition weight `|grad(alpha) . u|`.
#[inline]
pub fn transition_weight(grad_alpha: [f64; 2], u: [f64; 2]) -> f64 {
    (grad_alpha[0] * u[0] + grad_alpha[1] * u[1]).abs()
}

/// No-transition weight `(1 - |grad(alpha) . u|)+ (1 - |grad(c) . u|)+` with the color
/// term taken as the L2 norm over the three channels.
#[inline]
pub fn no_transition_weight(grad_alpha: [f64; 2], grad_color: [[f64; 2]; 3], u: [f64; 2]) -> f64 {
    let a = transition_weight(grad_alpha, u);
    let c = grad_color
        .iter()
        .map(|g| (g[0] * u[0] + g[1] * u[1]).powi(2))
        .sum::<f64>()
        .sqrt();
    (1.0 - a).max(0.0) * (1.0 - c).max(0.0)
}

/// Directed 8-neighborhood graph with weights `weight(p, u_pq)`.
fn neighborhood_graph<F>(width: usize, height: usize, weight: F) -> Result<FlowGraph>
where
    F: Fn(usize, [f64; 2]) -> f64 + Sync,
{
    let rows = (0..width * height)
        .into_par_iter()
        .map(|p| {
            let (x, y) = ((p % width) as isize, (p / width) as isize);
            let mut row = Vec::with_capacity(8);
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let (qx, qy) = (x + dx, y + dy);
                    if (dx, dy) == (0, 0) || qx < 0 || qy < 0 || qx >= width as isize || qy >= height as isize {
                        continue;
                    }
                    let w = weight(p, unit_offset(dx, dy));
                    if w != 0.0 {
                        row.push(((qy * width as isize + qx) as usize, w));
                    }
                }
            }
            row
        })
        .collect();
    FlowGraph::from_rows(rows)
}

/// Alpha-transition flow over the 3x3 neighborhood.
pub fn build_transition_flow(alpha: &Matte) -> Result<FlowGraph> {
    let g = compute_gradients(alpha.values(), alpha.width(), alpha.height());
    neighborhood_graph(alpha.width(), alpha.height(), |p, u| transition_weight(g.at(p), u))
}

fn color_gradients(image: &ImageRgb) -> [GradientField; 3] {
    [0, 1, 2].map(|c| compute_gradients(&image.channel(c), image.width(), image.height()))
}

/// No-transition flow over the 3x3 neighborhood.
pub fn build_no_transition_flow(image: &ImageRgb, alpha: &Matte) -> Result<FlowGraph> {
    image.grid().ensure_same(alpha.grid())?;
    let ga = compute_gradients(alpha.values(), alpha.width(), alpha.height());
    let gc = color_gradients(image);
    neighborhood_graph(image.width(), image.height(), |p, u| {
        no_transition_weight(ga.at(p), [gc[0].at(p), gc[1].at(p), gc[2].at(p)], u)
    })
}

/// Color-mixture flows for the foreground (search in unknown + opaque) and the
/// background (search in unknown + transparent) layers.
pub fn build_color_cm_flow(image: &ImageRgb, alpha: &Matte, params: &Params) -> Result<(FlowGraph, FlowGraph)> {
    image.grid().ensure_same(alpha.grid())?;
    let regions = AlphaRegions::from_matte(alpha);
    if regions.count(Region::Unknown) == 0 {
        return Err(MattingError::EmptyRegion("partially transparent"));
    }
    let fg = color_cm_layer(image, &regions, Region::Foreground, params)?
        .ok_or(MattingError::EmptyRegion("foreground color search space"))?;
    let bg = color_cm_layer(image, &regions, Region::Background, params)?
        .ok_or(MattingError::EmptyRegion("background color search space"))?;
    Ok((fg, bg))
}

/// One layer's color-mixture flow; `None` when the search space has fewer than two pixels.
pub(crate) fn color_cm_layer(
    image: &ImageRgb,
    regions: &AlphaRegions,
    side: Region,
    params: &Params,
) -> Result<Option<FlowGraph>> {
    let unknown = regions.pixels(Region::Unknown);
    let mut space = regions.pixels(side);
    space.extend_from_slice(&unknown);
    space.sort_unstable();
    if unknown.is_empty() || space.len() < 2 {
        return Ok(None);
    }
    let snapped = regions.alpha();
    let queries = build_features(
        image,
        &unknown,
        params.cm_coord_scale,
        FeatureLayout::ColorAlpha,
        Some(snapped),
    )?;
    let features = build_features(
        image,
        &space,
        params.cm_coord_scale,
        FeatureLayout::ColorAlpha,
        Some(snapped),
    )?;
    let index = KnnIndex::new(&features, params.knn_mode);
    let reconstruct = |p: usize| {
        let c = image.pixel(p);
        vec![c[0], c[1], c[2], snapped.value(p)]
    };
    mixture_graph(
        image.grid().len(),
        &index,
        &queries,
        params.k_cm,
        params.lle_reg,
        reconstruct,
    )
    .map(Some)
}

/// Intra-unknown flow for colors over `[r, g, b, alpha, x/20, y/20]`.
pub fn build_color_intra_u_flow(image: &ImageRgb, alpha: &Matte, params: &Params) -> Result<FlowGraph> {
    image.grid().ensure_same(alpha.grid())?;
    let regions = AlphaRegions::from_matte(alpha);
    let unknown = regions.pixels(Region::Unknown);
    if unknown.len() < 2 {
        return Err(MattingError::InvalidInput(
            "intra-unknown color flow needs at least two partially transparent pixels".into(),
        ));
    }
    let features = build_features(
        image,
        &unknown,
        params.uu_coord_scale,
        FeatureLayout::ColorAlpha,
        Some(regions.alpha()),
    )?;
    similarity_graph(image.grid().len(), &features, params.k_uu, params.knn_mode)
}
