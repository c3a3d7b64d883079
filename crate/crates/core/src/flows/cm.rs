use rayon::prelude::*;

use crate::error::{MattingError, Result};
use crate::knn::{build_features, FeatureLayout, Features, KnnIndex};
use crate::mixture::solve_mixture_weights;
use crate::params::Params;
use crate::types::{region_masks, FlowGraph, ImageRgb, Trimap};

/// Color-mixture flow: each unknown pixel is reconstructed from its `k_cm` nearest pixels
/// of the whole image in `[r, g, b, x, y]` space, with weights fitted on colors only.
pub fn build_cm_flow(image: &ImageRgb, trimap: &Trimap, params: &Params) -> Result<FlowGraph> {
    image.grid().ensure_same(trimap.grid())?;
    let masks = region_masks(trimap);
    if masks.unknown.is_empty() {
        return Err(MattingError::EmptyRegion("unknown"));
    }
    let all: Vec<usize> = (0..image.grid().len()).collect();
    let search = build_features(image, &all, params.cm_coord_scale, FeatureLayout::Color, None)?;
    let index = KnnIndex::new(&search, params.knn_mode);
    let queries = build_features(image, &masks.unknown, params.cm_coord_scale, FeatureLayout::Color, None)?;
    let colors = image.pixels();
    mixture_graph(image.grid().len(), &index, &queries, params.k_cm, params.lle_reg, |p| {
        colors[p].to_vec()
    })
}

/// Rows for every query pixel: K nearest neighbors from `index` (excluding the pixel itself)
/// weighted by a sum-to-one fit of `reconstruct(p)` from `reconstruct(q)`.
pub(crate) fn mixture_graph<R>(
    n: usize,
    index: &KnnIndex,
    queries: &Features,
    k: usize,
    reg: f64,
    reconstruct: R,
) -> Result<FlowGraph>
where
    R: Fn(usize) -> Vec<f64> + Sync,
{
    let rows: Vec<(usize, Vec<(usize, f64)>)> = queries
        .pixels()
        .par_iter()
        .enumerate()
        .map(|(i, &p)| {
            let neighbors = index.query_pixels(queries.get(i), k, Some(p))?;
            let vectors: Vec<Vec<f64>> = neighbors.iter().map(|&q| reconstruct(q)).collect();
            let weights = solve_mixture_weights(&reconstruct(p), &vectors, reg)?;
            Ok((p, neighbors.into_iter().zip(weights).collect()))
        })
        .collect::<Result<_>>()?;
    let mut full = vec![Vec::new(); n];
    for (p, row) in rows {
        full[p] = row;
    }
    FlowGraph::from_rows(full)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knn::squared_distance;
    use crate::types::Region;
    use nalgebra::{DMatrix, DVector};

    fn two_tone() -> (ImageRgb, Trimap) {
        let img = ImageRgb::from_fn(8, 8, |x, y| {
            if (x + 2 * y) % 5 < 2 {
                [0.9, 0.2, 0.1]
            } else {
                [0.1, 0.3, 0.8]
            }
        })
        .unwrap();
        let tri = Trimap::from_fn(8, 8, |x, _| match x {
            0..=1 => Region::Foreground,
            6..=7 => Region::Background,
            _ => Region::Unknown,
        });
        (img, tri)
    }

    #[test]
    fn matches_exhaustive_search_and_dense_solve() {
        let (img, tri) = two_tone();
        let params = Params {
            k_cm: 4,
            ..Params::default()
        };
        let graph = build_cm_flow(&img, &tri, &params).unwrap();
        let (w, h) = (8.0, 8.0);
        let feat = |p: usize| {
            let c = img.pixel(p);
            vec![c[0], c[1], c[2], (p % 8) as f64 / w, (p / 8) as f64 / h]
        };
        for p in 0..64 {
            if tri.label(p) != Region::Unknown {
                assert!(graph.row(p).is_empty());
                continue;
            }
            let mut all: Vec<(f64, usize)> = (0..64)
                .filter(|&q| q != p)
                .map(|q| (squared_distance(&feat(p), &feat(q)), q))
                .collect();
            all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let nbrs: Vec<usize> = all.iter().take(4).map(|e| e.1).collect();
            let cp = img.pixel(p);
            let gram = DMatrix::from_fn(4, 4, |i, j| {
                let ci = img.pixel(nbrs[i]);
                let cj = img.pixel(nbrs[j]);
                let g: f64 = (0..3).map(|d| (cp[d] - ci[d]) * (cp[d] - cj[d])).sum();
                g + if i == j { 1e-3 } else { 0.0 }
            });
            let raw = gram.lu().solve(&DVector::from_element(4, 1.0)).unwrap();
            let total = raw.sum();
            let row = graph.row(p);
            assert_eq!(row.iter().map(|e| e.0).collect::<Vec<_>>(), nbrs);
            for (i, (_, wq)) in row.iter().enumerate() {
                assert!((wq - raw[i] / total).abs() < 1e-10);
            }
            assert!((graph.row_sum(p) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn flat_image_reconstructs_exactly() {
        let img = ImageRgb::filled(6, 6, [0.4, 0.4, 0.4]).unwrap();
        let tri = Trimap::from_fn(6, 6, |x, _| if x == 0 { Region::Foreground } else { Region::Unknown });
        let graph = build_cm_flow(&img, &tri, &Params::default()).unwrap();
        let alpha = vec![0.7; 36];
        for (p, row) in graph.rows() {
            if row.is_empty() {
                continue;
            }
            let rec: f64 = row.iter().map(|(q, w)| w * alpha[*q]).sum();
            assert!((alpha[p] - rec).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicate_color_takes_the_mass() {
        let img = ImageRgb::from_fn(5, 1, |x, _| match x {
            0 => [0.2, 0.5, 0.7],
            1 => [0.9, 0.9, 0.1],
            2 => [0.2, 0.5, 0.7],
            3 => [0.0, 0.1, 0.0],
            _ => [1.0, 0.0, 1.0],
        })
        .unwrap();
        let tri = Trimap::from_fn(5, 1, |x, _| if x == 0 { Region::Unknown } else { Region::Background });
        let params = Params {
            k_cm: 3,
            lle_reg: 1e-10,
            ..Params::default()
        };
        let graph = build_cm_flow(&img, &tri, &params).unwrap();
        assert!((graph.weight(0, 2).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn needs_unknown_pixels() {
        let img = ImageRgb::filled(3, 3, [0.0; 3]).unwrap();
        let tri = Trimap::filled(3, 3, Region::Foreground);
        assert!(build_cm_flow(&img, &tri, &Params::default()).is_err());
    }
}
