//! Local flow from the closed-form matting affinity of 3x3 windows.
//!
//! Each window `k` fully inside the image and containing at least one unknown pixel adds
//! `(1 + (c_p - mu_k)^T (Sigma_k + eps/9 I)^-1 (c_q - mu_k)) / 9` to every pixel pair
//! `(p, q)` in it. Pairs sharing a window are at most two pixels apart, so each pixel
//! stores its 24 possible neighbors in a fixed 5x5 layout.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::error::Result;
use crate::params::Params;
use crate::sparse::CsrMatrix;
use crate::types::{FlowGraph, ImageRgb, PixelGrid, Region, Trimap};

const SPAN: usize = 5;
const CENTER: usize = 12;

#[inline]
fn slot(dx: isize, dy: isize) -> usize {
    ((dy + 2) as usize) * SPAN + (dx + 2) as usize
}

/// Symmetric affinity weights `W_L` of the local flow.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalAffinity {
    grid: PixelGrid,
    weights: Vec<[f64; SPAN * SPAN]>,
}

struct WindowStats {
    mean: Vector3<f64>,
    inv: Matrix3<f64>,
}

impl LocalAffinity {
    #[inline]
    pub fn grid(&self) -> PixelGrid {
        self.grid
    }

    /// Affinity between `p` and `q`; zero when they share no active window.
    pub fn weight(&self, p: usize, q: usize) -> f64 {
        let (px, py) = self.grid.coords(p);
        let (qx, qy) = self.grid.coords(q);
        let dx = qx as isize - px as isize;
        let dy = qy as isize - py as isize;
        if p == q || dx.abs() > 2 || dy.abs() > 2 {
            return 0.0;
        }
        self.weights[p][slot(dx, dy)]
    }

    /// Non-zero `(neighbor, weight)` pairs of pixel `p`.
    pub fn neighbors(&self, p: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (px, py) = self.grid.coords(p);
        let (w, h) = (self.grid.width as isize, self.grid.height as isize);
        (0..SPAN * SPAN).filter_map(move |s| {
            let v = self.weights[p][s];
            if v == 0.0 || s == CENTER {
                return None;
            }
            let qx = px as isize + (s % SPAN) as isize - 2;
            let qy = py as isize + (s / SPAN) as isize - 2;
            debug_assert!(qx >= 0 && qy >= 0 && qx < w && qy < h);
            Some(((qy * w + qx) as usize, v))
        })
    }

    /// Graph Laplacian `D_L - W_L`.
    pub fn laplacian(&self) -> Result<CsrMatrix> {
        let n = self.grid.len();
        let rows: Vec<Vec<(usize, f64)>> = (0..n)
            .into_par_iter()
            .map(|p| {
                let mut row: Vec<(usize, f64)> = self.neighbors(p).map(|(q, v)| (q, -v)).collect();
                let degree: f64 = -row.iter().map(|e| e.1).sum::<f64>();
                if degree != 0.0 || !row.is_empty() {
                    row.push((p, degree));
                }
                row
            })
            .collect();
        CsrMatrix::from_rows(n, rows)
    }

    pub fn to_flow_graph(&self) -> Result<FlowGraph> {
        FlowGraph::from_rows((0..self.grid.len()).map(|p| self.neighbors(p).collect()).collect())
    }
}

/// Builds the local matting affinity over all 3x3 windows that touch the unknown region.
pub fn build_local_flow(image: &ImageRgb, trimap: &Trimap, params: &Params) -> Result<LocalAffinity> {
    image.grid().ensure_same(trimap.grid())?;
    let active = |cx: usize, cy: usize| {
        (cy - 1..=cy + 1).any(|y| (cx - 1..=cx + 1).any(|x| trimap.label(y * trimap.width() + x) == Region::Unknown))
    };
    build_window_affinity(image, params.laplacian_eps, active)
}

pub(crate) fn build_window_affinity<F>(image: &ImageRgb, eps: f64, active: F) -> Result<LocalAffinity>
where
    F: Fn(usize, usize) -> bool + Sync,
{
    let grid = image.grid();
    let (w, h) = (grid.width, grid.height);
    let n = grid.len();
    let color = |x: usize, y: usize| {
        let c = image.at(x, y);
        Vector3::new(c[0], c[1], c[2])
    };

    // window statistics indexed by center pixel
    let stats: Vec<Option<WindowStats>> = (0..n)
        .into_par_iter()
        .map(|c| {
            let (cx, cy) = grid.coords(c);
            if cx == 0 || cy == 0 || cx + 1 >= w || cy + 1 >= h || !active(cx, cy) {
                return None;
            }
            let mut mean = Vector3::zeros();
            for y in cy - 1..=cy + 1 {
                for x in cx - 1..=cx + 1 {
                    mean += color(x, y);
                }
            }
            mean /= 9.0;
            let mut cov = Matrix3::zeros();
            for y in cy - 1..=cy + 1 {
                for x in cx - 1..=cx + 1 {
                    let d = color(x, y) - mean;
                    cov += d * d.transpose();
                }
            }
            cov /= 9.0;
            cov += Matrix3::identity() * (eps / 9.0);
            let inv = cov.try_inverse()?;
            Some(WindowStats { mean, inv })
        })
        .collect();

    let weights: Vec<[f64; SPAN * SPAN]> = (0..n)
        .into_par_iter()
        .map(|p| {
            let (px, py) = grid.coords(p);
            let cp = color(px, py);
            let mut row = [0.0; SPAN * SPAN];
            for cy in py.saturating_sub(1)..=(py + 1).min(h - 1) {
                for cx in px.saturating_sub(1)..=(px + 1).min(w - 1) {
                    let Some(s) = &stats[cy * w + cx] else { continue };
                    let left = (cp - s.mean).transpose() * s.inv;
                    for qy in cy - 1..=cy + 1 {
                        for qx in cx - 1..=cx + 1 {
                            if qx == px && qy == py {
                                continue;
                            }
                            let a = (1.0 + (left * (color(qx, qy) - s.mean))[0]) / 9.0;
                            row[slot(qx as isize - px as isize, qy as isize - py as isize)] += a;
                        }
                    }
                }
            }
            row
        })
        .collect();

    Ok(LocalAffinity { grid, weights })
}
