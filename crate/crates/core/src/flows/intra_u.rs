use rayon::prelude::*;

use crate::error::{MattingError, Result};
use crate::flows::similarity_weight;
use crate::knn::{build_features, FeatureLayout, Features, KnnIndex, KnnMode};
use crate::params::Params;
use crate::types::{region_masks, FlowGraph, ImageRgb, Trimap};

/// Intra-unknown flow: `k_uu` nearest unknown pixels in `[r, g, b, x/20, y/20]`,
/// symmetrized, weighted by `max(1 - L1 distance, 0)`.
pub fn build_intra_u_flow(image: &ImageRgb, trimap: &Trimap, params: &Params) -> Result<FlowGraph> {
    image.grid().ensure_same(trimap.grid())?;
    let masks = region_masks(trimap);
    if masks.unknown.len() < 2 {
        return Err(MattingError::InvalidInput(
            "intra-unknown flow needs at least two unknown pixels".into(),
        ));
    }
    let features = build_features(image, &masks.unknown, params.uu_coord_scale, FeatureLayout::Color, None)?;
    similarity_graph(image.grid().len(), &features, params.k_uu, params.knn_mode)
}

/// Symmetric K-nearest-neighbor graph over `features` with L1 similarity weights.
pub(crate) fn similarity_graph(n: usize, features: &Features, k: usize, mode: KnnMode) -> Result<FlowGraph> {
    let index = KnnIndex::new(features, mode);
    let directed: Vec<Vec<usize>> = (0..features.len())
        .into_par_iter()
        .map(|i| index.query_pixels(features.get(i), k, Some(features.pixels()[i])))
        .collect::<Result<_>>()?;

    let mut slot = vec![usize::MAX; n];
    for (i, &p) in features.pixels().iter().enumerate() {
        slot[p] = i;
    }
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); features.len()];
    for (i, nbrs) in directed.iter().enumerate() {
        for &q in nbrs {
            adjacency[i].push(q);
            adjacency[slot[q]].push(features.pixels()[i]);
        }
    }
    let mut rows = vec![Vec::new(); n];
    for (i, mut nbrs) in adjacency.into_iter().enumerate() {
        nbrs.sort_unstable();
        nbrs.dedup();
        let fp = features.get(i);
        rows[features.pixels()[i]] = nbrs
            .into_iter()
            .map(|q| (q, similarity_weight(fp, features.get(slot[q]))))
            .collect();
    }
    FlowGraph::from_rows(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Region;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn symmetric_with_unit_range_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let img = ImageRgb::from_fn(12, 10, |_, _| [rng.random(), rng.random(), rng.random()]).unwrap();
        let tri = Trimap::from_fn(12, 10, |x, y| match (x, y) {
            (0..=2, _) => Region::Foreground,
            (10.., _) => Region::Background,
            _ => Region::Unknown,
        });
        let g = build_intra_u_flow(&img, &tri, &Params::default()).unwrap();
        let mut edges = 0;
        for (p, row) in g.rows() {
            if tri.label(p) != Region::Unknown {
                assert!(row.is_empty());
                continue;
            }
            assert!(row.len() >= 5);
            for &(q, w) in row {
                assert_eq!(tri.label(q), Region::Unknown);
                assert!((0.0..=1.0).contains(&w));
                assert_eq!(g.weight(q, p), Some(w));
                edges += 1;
            }
        }
        assert_eq!(edges, g.edge_count());
    }

    #[test]
    fn identical_unknown_pixels_get_unit_weight() {
        let img = ImageRgb::filled(40, 1, [0.2, 0.2, 0.2]).unwrap();
        let tri = Trimap::filled(40, 1, Region::Unknown);
        let g = build_intra_u_flow(&img, &tri, &Params::default()).unwrap();
        // neighbors at distance one column differ only by 1/(40*20) in x
        let w = g.weight(10, 11).unwrap();
        assert!((w - (1.0 - 1.0 / 800.0)).abs() < 1e-12);
    }

    #[test]
    fn needs_two_unknowns() {
        let img = ImageRgb::filled(2, 1, [0.2; 3]).unwrap();
        let tri = Trimap::from_fn(2, 1, |x, _| if x == 0 { Region::Unknown } else { Region::Background });
        assert!(build_intra_u_flow(&img, &tri, &Params::default()).is_err());
    }
}
