//! Foreground and background layer colors for a given matte.

mod flows;
mod gradients;

pub use flows::{
    build_color_cm_flow, build_color_intra_u_flow, build_no_transition_flow, build_transition_flow,
    no_transition_weight, transition_weight, unit_offset,
};
pub use gradients::{compute_gradients, GradientField, DERIVATIVE_TAPS, SMOOTH_TAPS};

use std::time::Instant;

use rayon::prelude::*;

use crate::error::Result;
use crate::params::Params;
use crate::pcg::{self, SolveReport};
use crate::solver::graph_laplacian;
use crate::sparse::CsrMatrix;
use crate::types::{FlowGraph, ImageRgb, Matte, Region, Trimap};

/// Alpha values within this distance of 0 or 1 are treated as exactly transparent or opaque.
pub const SNAP_TOLERANCE: f64 = 1.0 / 255.0;

/// Opaque, transparent and partially transparent pixels of a matte.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaRegions {
    labels: Trimap,
    alpha: Matte,
}

impl AlphaRegions {
    /// Snaps near-binary alphas and labels the pixels from the snapped values.
    pub fn from_matte(alpha: &Matte) -> Self {
        let snapped: Vec<f64> = alpha
            .values()
            .iter()
            .map(|&a| {
                if a <= SNAP_TOLERANCE {
                    0.0
                } else if a >= 1.0 - SNAP_TOLERANCE {
                    1.0
                } else {
                    a
                }
            })
            .collect();
        let labels = Trimap::from_fn(alpha.width(), alpha.height(), |x, y| {
            match snapped[y * alpha.width() + x] {
                1.0 => Region::Foreground,
                0.0 => Region::Background,
                _ => Region::Unknown,
            }
        });
        Self {
            labels,
            alpha: Matte::from_fn(alpha.width(), alpha.height(), |x, y| snapped[y * alpha.width() + x]),
        }
    }

    pub fn labels(&self) -> &Trimap {
        &self.labels
    }

    /// The snapped matte.
    pub fn alpha(&self) -> &Matte {
        &self.alpha
    }

    pub fn region(&self, p: usize) -> Region {
        self.labels.label(p)
    }

    pub fn count(&self, region: Region) -> usize {
        self.labels.count(region)
    }

    pub fn pixels(&self, region: Region) -> Vec<usize> {
        (0..self.labels.grid().len())
            .filter(|&p| self.labels.label(p) == region)
            .collect()
    }
}

/// Estimated layers, clamped to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerColors {
    pub foreground: ImageRgb,
    pub background: ImageRgb,
}

/// The flows that propagate layer colors.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorFlows {
    pub regions: AlphaRegions,
    pub transition: FlowGraph,
    pub no_transition: FlowGraph,
    pub mixture_fg: FlowGraph,
    pub mixture_bg: FlowGraph,
    pub intra_unknown: FlowGraph,
}

impl ColorFlows {
    /// Builds every color flow; flows whose search space is too small come out empty.
    pub fn build(image: &ImageRgb, alpha: &Matte, params: &Params) -> Result<Self> {
        image.grid().ensure_same(alpha.grid())?;
        let n = image.grid().len();
        let regions = AlphaRegions::from_matte(alpha);
        let snapped = regions.alpha();
        let transition = build_transition_flow(snapped)?;
        let no_transition = build_no_transition_flow(image, snapped)?;
        let layer = |side| -> Result<FlowGraph> {
            Ok(flows::color_cm_layer(image, &regions, side, params)?.unwrap_or_else(|| FlowGraph::empty(n)))
        };
        let mixture_fg = layer(Region::Foreground)?;
        let mixture_bg = layer(Region::Background)?;
        let intra_unknown = if regions.count(Region::Unknown) >= 2 {
            build_color_intra_u_flow(image, snapped, params)?
        } else {
            FlowGraph::empty(n)
        };
        Ok(Self {
            regions,
            transition,
            no_transition,
            mixture_fg,
            mixture_bg,
            intra_unknown,
        })
    }
}

/// Laplacian of the symmetrized graph `(W + W^T) / 2`.
fn symmetric_laplacian(graph: &FlowGraph) -> Result<CsrMatrix> {
    let n = graph.len();
    let w = CsrMatrix::from_rows(n, graph.rows().map(|(_, row)| row.to_vec()).collect())?;
    let s = CsrMatrix::linear_combination(&[(0.5, &w), (0.5, &w.transpose())])?;
    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|p| {
            let (cols, vals) = s.row(p);
            let degree: f64 = vals.iter().sum();
            let mut row: Vec<(usize, f64)> = cols.iter().zip(vals).map(|(&q, &v)| (q, -v)).collect();
            if !row.is_empty() {
                row.push((p, degree));
            }
            row
        })
        .collect();
    CsrMatrix::from_rows(n, rows)
}

/// The `2N x 2N` system shared by the three channels, unknowns ordered `[f; b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorSystem {
    pub matrix: CsrMatrix,
    /// Right-hand side per color channel.
    pub rhs: [Vec<f64>; 3],
}

impl ColorSystem {
    pub fn assemble(image: &ImageRgb, flows: &ColorFlows, params: &Params) -> Result<Self> {
        let n = image.grid().len();
        let alpha = flows.regions.alpha().values();
        let local = CsrMatrix::linear_combination(&[
            (params.sigma_l, &symmetric_laplacian(&flows.transition)?),
            (params.sigma_l, &symmetric_laplacian(&flows.no_transition)?),
            (params.sigma_uu, &graph_laplacian(&flows.intra_unknown)?),
        ])?;
        let mixture = |g: &FlowGraph| -> Result<CsrMatrix> {
            let r = graph_laplacian(g)?;
            r.transpose().matmul(&r)
        };
        let diag = |f: &dyn Fn(f64) -> f64| {
            CsrMatrix::from_diagonal(
                &alpha
                    .iter()
                    .map(|&a| params.lambda * f(a) + params.color_prior)
                    .collect::<Vec<_>>(),
            )
        };
        let ff = CsrMatrix::linear_combination(&[
            (1.0, &local),
            (1.0, &mixture(&flows.mixture_fg)?),
            (1.0, &diag(&|a| a * a)),
        ])?;
        let bb = CsrMatrix::linear_combination(&[
            (1.0, &local),
            (1.0, &mixture(&flows.mixture_bg)?),
            (1.0, &diag(&|a| (1.0 - a) * (1.0 - a))),
        ])?;
        let fb = CsrMatrix::from_diagonal(&alpha.iter().map(|&a| params.lambda * a * (1.0 - a)).collect::<Vec<_>>());
        let matrix = CsrMatrix::block(&[vec![Some(&ff), Some(&fb)], vec![Some(&fb), Some(&bb)]])?;
        let rhs = [0, 1, 2].map(|c| {
            let mut rhs = vec![0.0; 2 * n];
            for p in 0..n {
                let (a, v) = (alpha[p], image.pixel(p)[c]);
                rhs[p] = params.lambda * a * v + params.color_prior * v;
                rhs[n + p] = params.lambda * (1.0 - a) * v + params.color_prior * v;
            }
            rhs
        });
        Ok(Self { matrix, rhs })
    }

    /// Unclamped `[f; b]` solution of channel `c`, warm-started from the observed color.
    pub fn solve_channel(&self, image: &ImageRgb, c: usize, params: &Params) -> Result<(Vec<f64>, SolveReport)> {
        let observed = image.channel(c);
        let initial = [observed.as_slice(), observed.as_slice()].concat();
        pcg::solve(&self.matrix, &self.rhs[c], initial, params.pcg_tol, params.pcg_max_iter)
    }
}

/// Solves for the foreground and background layers channel by channel.
///
/// The report sums iterations and times over the channels and keeps the worst residual.
pub fn estimate_colors(image: &ImageRgb, alpha: &Matte, params: &Params) -> Result<(LayerColors, SolveReport)> {
    let start = Instant::now();
    let flows = ColorFlows::build(image, alpha, params)?;
    let system = ColorSystem::assemble(image, &flows, params)?;
    let n = image.grid().len();
    let solutions: Vec<(Vec<f64>, SolveReport)> = (0..3)
        .into_par_iter()
        .map(|c| system.solve_channel(image, c, params))
        .collect::<Result<_>>()?;
    let layer = |offset: usize| {
        let data = (0..n)
            .map(|p| [0, 1, 2].map(|c| solutions[c].0[offset + p].clamp(0.0, 1.0)))
            .collect();
        ImageRgb::new(image.width(), image.height(), data)
    };
    let report = SolveReport {
        iterations: solutions.iter().map(|s| s.1.iterations).sum(),
        relative_residual: solutions.iter().map(|s| s.1.relative_residual).fold(0.0, f64::max),
        seconds: start.elapsed().as_secs_f64(),
    };
    Ok((
        LayerColors {
            foreground: layer(0)?,
            background: layer(n)?,
        },
        report,
    ))
}

/// `alpha f + (1 - alpha) background`, clamped.
pub fn composite(fg: &ImageRgb, alpha: &Matte, background: &ImageRgb) -> Result<ImageRgb> {
    fg.grid().ensure_same(alpha.grid())?;
    fg.grid().ensure_same(background.grid())?;
    let data = (0..fg.grid().len())
        .map(|p| {
            let (f, b, a) = (fg.pixel(p), background.pixel(p), alpha.value(p).clamp(0.0, 1.0));
            [0, 1, 2].map(|c| (a * f[c] + (1.0 - a) * b[c]).clamp(0.0, 1.0))
        })
        .collect();
    ImageRgb::new(fg.width(), fg.height(), data)
}

/// Foreground multiplied by its alpha.
pub fn premultiply(fg: &ImageRgb, alpha: &Matte) -> Result<ImageRgb> {
    composite(fg, alpha, &ImageRgb::filled(fg.width(), fg.height(), [0.0; 3])?)
}
