//! Pixel feature vectors and a k-d tree for K-nearest-neighbor queries over pixel subsets.
//!
//! Distances are Euclidean in feature space. Ties are broken by the lower pixel index so
//! that graph construction is reproducible across runs and thread counts.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::error::{MattingError, Result};
use crate::types::{ImageRgb, Matte};

const LEAF_SIZE: usize = 12;

/// Search strategy of a [`KnnIndex`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KnnMode {
    /// Full backtracking; always returns the exact K nearest neighbors.
    #[default]
    Exact,
    /// Best-bin-first search that stops after `max_checks` leaves once K candidates are held.
    Approximate { max_checks: usize },
}

/// Which per-pixel feature vector to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureLayout {
    /// `[r, g, b, s*x/w, s*y/h]`
    Color,
    /// `[r, g, b, alpha, s*x/w, s*y/h]`
    ColorAlpha,
}

impl FeatureLayout {
    pub fn dim(self) -> usize {
        match self {
            FeatureLayout::Color => 5,
            FeatureLayout::ColorAlpha => 6,
        }
    }
}

/// Feature vectors for a list of pixels, stored row-major in the order the pixels were given.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    dim: usize,
    pixels: Vec<usize>,
    data: Vec<f64>,
}

impl Features {
    /// Wraps externally computed vectors, e.g. patch means.
    pub fn from_raw(dim: usize, pixels: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() != dim * pixels.len() {
            return Err(MattingError::InvalidInput(format!(
                "{} values cannot hold {} features of dimension {dim}",
                data.len(),
                pixels.len()
            )));
        }
        Ok(Self { dim, pixels, data })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    #[inline]
    pub fn pixels(&self) -> &[usize] {
        &self.pixels
    }

    /// Feature of the `i`-th listed pixel.
    #[inline]
    pub fn get(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[f64])> {
        self.pixels.iter().copied().zip(self.data.chunks_exact(self.dim))
    }
}

/// Builds one feature vector per pixel in `pixels`.
///
/// Coordinates are normalized by image width and height and then multiplied by `coord_scale`.
pub fn build_features(
    image: &ImageRgb,
    pixels: &[usize],
    coord_scale: f64,
    layout: FeatureLayout,
    alpha: Option<&Matte>,
) -> Result<Features> {
    let grid = image.grid();
    if let Some(a) = alpha {
        grid.ensure_same(a.grid())?;
    }
    let alpha = match (layout, alpha) {
        (FeatureLayout::ColorAlpha, None) => return Err(MattingError::MissingAlpha),
        (FeatureLayout::ColorAlpha, Some(a)) => Some(a),
        (FeatureLayout::Color, _) => None,
    };
    let dim = layout.dim();
    let (w, h) = (grid.width as f64, grid.height as f64);
    let mut data = Vec::with_capacity(dim * pixels.len());
    for &p in pixels {
        if p >= grid.len() {
            return Err(MattingError::InvalidInput(format!(
                "pixel {p} is outside a {}x{} image",
                grid.width, grid.height
            )));
        }
        let (x, y) = grid.coords(p);
        data.extend_from_slice(&image.pixel(p));
        if let Some(a) = alpha {
            data.push(a.value(p));
        }
        data.push(coord_scale * x as f64 / w);
        data.push(coord_scale * y as f64 / h);
    }
    Ok(Features {
        dim,
        pixels: pixels.to_vec(),
        data,
    })
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// A query result: pixel index and squared feature distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub pixel: usize,
    pub dist2: f64,
}

impl Neighbor {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.dist2.total_cmp(&other.dist2).then(self.pixel.cmp(&other.pixel))
    }
}

impl Eq for Neighbor {}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Neighbor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key_cmp(other)
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// k-d tree over the features of a pixel subset.
#[derive(Debug, Clone)]
pub struct KnnIndex {
    dim: usize,
    mode: KnnMode,
    points: Vec<f64>,
    pixels: Vec<usize>,
    nodes: Vec<Node>,
}

impl KnnIndex {
    pub fn new(features: &Features, mode: KnnMode) -> Self {
        let dim = features.dim();
        let mut order: Vec<usize> = (0..features.len()).collect();
        let mut nodes = Vec::new();
        if !order.is_empty() {
            build_node(features, &mut order, 0, &mut nodes);
        }
        let mut points = Vec::with_capacity(features.len() * dim);
        let mut pixels = Vec::with_capacity(features.len());
        for &i in &order {
            points.extend_from_slice(features.get(i));
            pixels.push(features.pixels()[i]);
        }
        Self {
            dim,
            mode,
            points,
            pixels,
            nodes,
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Returns up to `k` nearest pixels to `query`, nearest first, skipping `exclude`.
    pub fn query(&self, query: &[f64], k: usize, exclude: Option<usize>) -> Result<Vec<Neighbor>> {
        if k == 0 {
            return Err(MattingError::InvalidInput("k must be at least 1".into()));
        }
        if query.len() != self.dim {
            return Err(MattingError::InvalidInput(format!(
                "query has dimension {}, index has {}",
                query.len(),
                self.dim
            )));
        }
        let available = match exclude {
            Some(p) if self.pixels.contains(&p) => self.len() - 1,
            _ => self.len(),
        };
        if available == 0 {
            return Err(MattingError::EmptyRegion("searched by the nearest-neighbor query"));
        }
        let mut search = Search {
            index: self,
            query,
            k: k.min(available),
            exclude,
            heap: BinaryHeap::with_capacity(k + 1),
            checks_left: match self.mode {
                KnnMode::Exact => usize::MAX,
                KnnMode::Approximate { max_checks } => max_checks.max(1),
            },
        };
        match self.mode {
            KnnMode::Exact => search.visit(0),
            KnnMode::Approximate { .. } => search.best_bin_first(),
        }
        Ok(search.heap.into_sorted_vec())
    }

    /// Pixel indices of the `k` nearest neighbors of `query`.
    pub fn query_pixels(&self, query: &[f64], k: usize, exclude: Option<usize>) -> Result<Vec<usize>> {
        Ok(self.query(query, k, exclude)?.into_iter().map(|n| n.pixel).collect())
    }
}

fn build_node(features: &Features, order: &mut [usize], offset: usize, nodes: &mut Vec<Node>) -> usize {
    let id = nodes.len();
    if order.len() <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            start: offset,
            end: offset + order.len(),
        });
        return id;
    }
    let dim = features.dim();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for &i in order.iter() {
        for (d, v) in features.get(i).iter().enumerate() {
            lo[d] = lo[d].min(*v);
            hi[d] = hi[d].max(*v);
        }
    }
    let axis = (0..dim)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .unwrap_or(0);
    if hi[axis] - lo[axis] <= 0.0 {
        // all points coincide
        nodes.push(Node::Leaf {
            start: offset,
            end: offset + order.len(),
        });
        return id;
    }
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| features.get(a)[axis].total_cmp(&features.get(b)[axis]));
    let value = features.get(order[mid])[axis];
    nodes.push(Node::Leaf { start: 0, end: 0 });
    let (left_part, right_part) = order.split_at_mut(mid);
    let left = build_node(features, left_part, offset, nodes);
    let right = build_node(features, right_part, offset + mid, nodes);
    nodes[id] = Node::Split {
        axis,
        value,
        left,
        right,
    };
    id
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Branch {
    bound: f64,
    node: usize,
}

impl Eq for Branch {}

impl Ord for Branch {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound.total_cmp(&other.bound).then(self.node.cmp(&other.node))
    }
}

impl PartialOrd for Branch {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Search<'a> {
    index: &'a KnnIndex,
    query: &'a [f64],
    k: usize,
    exclude: Option<usize>,
    heap: BinaryHeap<Neighbor>,
    checks_left: usize,
}

impl Search<'_> {
    fn worst(&self) -> Option<&Neighbor> {
        if self.heap.len() < self.k {
            None
        } else {
            self.heap.peek()
        }
    }

    fn offer(&mut self, candidate: Neighbor) {
        if self.heap.len() < self.k {
            self.heap.push(candidate);
        } else if let Some(worst) = self.heap.peek() {
            if candidate < *worst {
                self.heap.pop();
                self.heap.push(candidate);
            }
        }
    }

    /// Best-bin-first traversal: pending branches are explored by their distance lower bound
    /// until the leaf budget runs out.
    fn best_bin_first(&mut self) {
        let mut pending = BinaryHeap::new();
        pending.push(Reverse(Branch { bound: 0.0, node: 0 }));
        while let Some(Reverse(Branch { bound, node })) = pending.pop() {
            if self.worst().is_some_and(|w| bound > w.dist2) {
                break;
            }
            if self.checks_left == 0 && self.heap.len() >= self.k {
                break;
            }
            let mut node = node;
            loop {
                match self.index.nodes[node] {
                    Node::Leaf { .. } => {
                        self.scan_leaf(node);
                        break;
                    }
                    Node::Split {
                        axis,
                        value,
                        left,
                        right,
                    } => {
                        let diff = self.query[axis] - value;
                        let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                        pending.push(Reverse(Branch {
                            bound: bound.max(diff * diff),
                            node: far,
                        }));
                        node = near;
                    }
                }
            }
        }
    }

    fn scan_leaf(&mut self, node: usize) {
        if let Node::Leaf { start, end } = self.index.nodes[node] {
            let dim = self.index.dim;
            for slot in start..end {
                let pixel = self.index.pixels[slot];
                if Some(pixel) == self.exclude {
                    continue;
                }
                let point = &self.index.points[slot * dim..(slot + 1) * dim];
                let dist2 = squared_distance(point, self.query);
                self.offer(Neighbor { pixel, dist2 });
            }
            self.checks_left = self.checks_left.saturating_sub(1);
        }
    }

    fn visit(&mut self, node: usize) {
        match self.index.nodes[node] {
            Node::Leaf { .. } => self.scan_leaf(node),
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = self.query[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.visit(near);
                // equal distances must still be visited for the index tie-break
                let prune = self.worst().is_some_and(|w| diff * diff > w.dist2);
                if !prune {
                    self.visit(far);
                }
            }
        }
    }
}
