//! Image, trimap and matte containers shared by every stage of the pipeline.

use crate::error::{MattingError, Result};

/// An RGB triple with channels in `[0, 1]`.
pub type Rgb = [f64; 3];

/// Width and height of a pixel grid, with row-major index helpers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PixelGrid {
    pub width: usize,
    pub height: usize,
}

impl PixelGrid {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major linear index of `(x, y)`.
    pub fn index(&self, x: usize, y: usize) -> Result<usize> {
        pixel_index(x, y, self.width, self.height)
    }

    /// Inverse of [`PixelGrid::index`]. The caller guarantees `index < len()`.
    #[inline]
    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index % self.width, index / self.width)
    }

    pub fn ensure_same(&self, other: PixelGrid) -> Result<()> {
        if *self != other {
            return Err(MattingError::DimensionMismatch {
                expected_width: self.width,
                expected_height: self.height,
                found_width: other.width,
                found_height: other.height,
            });
        }
        Ok(())
    }
}

/// Row-major linear index `y * width + x`.
pub fn pixel_index(x: usize, y: usize, width: usize, height: usize) -> Result<usize> {
    if x >= width || y >= height {
        return Err(MattingError::IndexOutOfRange { x, y, width, height });
    }
    Ok(y * width + x)
}

/// A dense RGB image with channels stored as reals in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRgb {
    grid: PixelGrid,
    data: Vec<Rgb>,
}

impl ImageRgb {
    pub fn new(width: usize, height: usize, data: Vec<Rgb>) -> Result<Self> {
        if data.len() != width * height {
            return Err(MattingError::InvalidInput(format!(
                "image data has {} pixels, expected {}x{}",
                data.len(),
                width,
                height
            )));
        }
        if let Some(bad) = data.iter().flatten().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(MattingError::InvalidInput(format!(
                "color channel {bad} is outside [0, 1]"
            )));
        }
        Ok(Self {
            grid: PixelGrid::new(width, height),
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> Rgb) -> Result<Self> {
        let data = (0..width * height).map(|i| f(i % width, i / width)).collect();
        Self::new(width, height, data)
    }

    pub fn filled(width: usize, height: usize, color: Rgb) -> Result<Self> {
        Self::new(width, height, vec![color; width * height])
    }

    #[inline]
    pub fn grid(&self) -> PixelGrid {
        self.grid
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.grid.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.grid.height
    }

    #[inline]
    pub fn pixels(&self) -> &[Rgb] {
        &self.data
    }

    #[inline]
    pub fn pixel(&self, index: usize) -> Rgb {
        self.data[index]
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> Rgb {
        self.data[y * self.grid.width + x]
    }

    /// One color channel as a scalar field.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.data.iter().map(|p| p[c]).collect()
    }

    /// Rebuilds the image with its channels reordered: output channel `i` is input channel `order[i]`.
    pub fn permute_channels(&self, order: [usize; 3]) -> Self {
        let data = self
            .data
            .iter()
            .map(|p| [p[order[0]], p[order[1]], p[order[2]]])
            .collect();
        Self { grid: self.grid, data }
    }
}

/// Trimap label of a single pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Foreground,
    Background,
    Unknown,
}

impl Region {
    #[inline]
    pub fn is_known(self) -> bool {
        self != Region::Unknown
    }

    /// Known alpha for the region, `None` for unknown pixels.
    #[inline]
    pub fn known_alpha(self) -> Option<f64> {
        match self {
            Region::Foreground => Some(1.0),
            Region::Background => Some(0.0),
            Region::Unknown => None,
        }
    }

    /// Maps a gray level in `[0, 1]` to a label: `>= 0.8` is foreground, `<= 0.2` background.
    pub fn from_gray(value: f64) -> Self {
        if value >= 0.8 {
            Region::Foreground
        } else if value <= 0.2 {
            Region::Background
        } else {
            Region::Unknown
        }
    }

    pub fn to_gray(self) -> f64 {
        match self {
            Region::Foreground => 1.0,
            Region::Background => 0.0,
            Region::Unknown => 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trimap {
    grid: PixelGrid,
    labels: Vec<Region>,
}

impl Trimap {
    pub fn new(width: usize, height: usize, labels: Vec<Region>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(MattingError::InvalidInput(format!(
                "trimap has {} labels, expected {}x{}",
                labels.len(),
                width,
                height
            )));
        }
        Ok(Self {
            grid: PixelGrid::new(width, height),
            labels,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> Region) -> Self {
        let labels = (0..width * height).map(|i| f(i % width, i / width)).collect();
        Self {
            grid: PixelGrid::new(width, height),
            labels,
        }
    }

    pub fn filled(width: usize, height: usize, region: Region) -> Self {
        Self::from_fn(width, height, |_, _| region)
    }

    #[inline]
    pub fn grid(&self) -> PixelGrid {
        self.grid
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.grid.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.grid.height
    }

    #[inline]
    pub fn labels(&self) -> &[Region] {
        &self.labels
    }

    #[inline]
    pub fn label(&self, index: usize) -> Region {
        self.labels[index]
    }

    pub fn set(&mut self, index: usize, region: Region) {
        self.labels[index] = region;
    }

    /// Alpha implied by the known labels: 1 on foreground, 0 elsewhere.
    pub fn known_alpha(&self) -> Vec<f64> {
        self.labels
            .iter()
            .map(|r| if *r == Region::Foreground { 1.0 } else { 0.0 })
            .collect()
    }

    pub fn count(&self, region: Region) -> usize {
        self.labels.iter().filter(|r| **r == region).count()
    }
}

/// Pixel indices of each trimap region, in increasing order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RegionMasks {
    pub foreground: Vec<usize>,
    pub background: Vec<usize>,
    pub unknown: Vec<usize>,
}

impl RegionMasks {
    pub fn known(&self) -> Vec<usize> {
        let mut known: Vec<usize> = self.foreground.iter().chain(&self.background).copied().collect();
        known.sort_unstable();
        known
    }
}

pub fn region_masks(trimap: &Trimap) -> RegionMasks {
    let mut masks = RegionMasks::default();
    for (i, r) in trimap.labels.iter().enumerate() {
        match r {
            Region::Foreground => masks.foreground.push(i),
            Region::Background => masks.background.push(i),
            Region::Unknown => masks.unknown.push(i),
        }
    }
    masks
}

/// Per-pixel opacity.
#[derive(Debug, Clone, PartialEq)]
pub struct Matte {
    grid: PixelGrid,
    alpha: Vec<f64>,
}

impl Matte {
    /// Wraps raw alpha values without clamping.
    pub fn new(width: usize, height: usize, alpha: Vec<f64>) -> Result<Self> {
        if alpha.len() != width * height {
            return Err(MattingError::InvalidInput(format!(
                "matte has {} values, expected {}x{}",
                alpha.len(),
                width,
                height
            )));
        }
        Ok(Self {
            grid: PixelGrid::new(width, height),
            alpha,
        })
    }

    /// Wraps alpha values after clamping each to `[0, 1]`.
    pub fn clamped(width: usize, height: usize, mut alpha: Vec<f64>) -> Result<Self> {
        for a in &mut alpha {
            *a = a.clamp(0.0, 1.0);
        }
        Self::new(width, height, alpha)
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let alpha = (0..width * height).map(|i| f(i % width, i / width)).collect();
        Self {
            grid: PixelGrid::new(width, height),
            alpha,
        }
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self::from_fn(width, height, |_, _| value)
    }

    pub fn from_trimap(trimap: &Trimap) -> Self {
        Self {
            grid: trimap.grid(),
            alpha: trimap.known_alpha(),
        }
    }

    #[inline]
    pub fn grid(&self) -> PixelGrid {
        self.grid
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.grid.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.grid.height
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.alpha
    }

    #[inline]
    pub fn value(&self, index: usize) -> f64 {
        self.alpha[index]
    }

    pub fn into_values(self) -> Vec<f64> {
        self.alpha
    }
}

/// Sparse weighted neighbor lists, one row per pixel of the grid.
///
/// Rows of pixels that are not flow sources are empty.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowGraph {
    offsets: Vec<usize>,
    edges: Vec<(usize, f64)>,
}

impl FlowGraph {
    pub fn empty(n: usize) -> Self {
        Self {
            offsets: vec![0; n + 1],
            edges: Vec::new(),
        }
    }

    /// Builds a graph from per-pixel rows. Self edges and out-of-range targets are rejected.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = rows.len();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut edges = Vec::with_capacity(rows.iter().map(Vec::len).sum());
        offsets.push(0);
        for (src, row) in rows.into_iter().enumerate() {
            for &(dst, w) in &row {
                if dst == src || dst >= n {
                    return Err(MattingError::InvalidInput(format!(
                        "invalid flow edge {src} -> {dst} in a graph of {n} pixels"
                    )));
                }
                if !w.is_finite() {
                    return Err(MattingError::InvalidInput(format!(
                        "non-finite flow weight on edge {src} -> {dst}"
                    )));
                }
            }
            edges.extend(row);
            offsets.push(edges.len());
        }
        Ok(Self { offsets, edges })
    }

    /// Number of pixels (rows).
    #[inline]
    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    #[inline]
    pub fn row(&self, src: usize) -> &[(usize, f64)] {
        &self.edges[self.offsets[src]..self.offsets[src + 1]]
    }

    pub fn rows(&self) -> impl Iterator<Item = (usize, &[(usize, f64)])> {
        (0..self.len()).map(move |i| (i, self.row(i)))
    }

    pub fn weight(&self, src: usize, dst: usize) -> Option<f64> {
        self.row(src).iter().find(|(q, _)| *q == dst).map(|(_, w)| *w)
    }

    pub fn row_sum(&self, src: usize) -> f64 {
        self.row(src).iter().map(|(_, w)| w).sum()
    }

    /// Writes `src dst weight` lines for every edge.
    pub fn write_edge_list<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        for (src, row) in self.rows() {
            for (dst, w) in row {
                writeln!(out, "{src} {dst} {w:.17e}")?;
            }
        }
        Ok(())
    }
}
