//! Sparse energy systems for alpha estimation and matte regularization.

use std::time::Instant;

use log::{debug, warn};
use rayon::prelude::*;

use crate::error::{MattingError, Result};
use crate::flows::{build_cm_flow, build_intra_u_flow, build_ktou_flow, build_local_flow, KtoUResult, LocalAffinity};
use crate::params::Params;
use crate::pcg::{self, SolveReport};
use crate::sparse::CsrMatrix;
use crate::trimap::{classify_transparency, edge_trim, patch_trim, TransparencyDecision};
use crate::types::{region_masks, FlowGraph, ImageRgb, Matte, Region, Trimap};

/// Graph Laplacian `D - W` of a (possibly directed) flow graph, `D` holding the row sums.
pub fn graph_laplacian(graph: &FlowGraph) -> Result<CsrMatrix> {
    let rows: Vec<Vec<(usize, f64)>> = (0..graph.len())
        .into_par_iter()
        .map(|p| {
            let row = graph.row(p);
            if row.is_empty() {
                return Vec::new();
            }
            let mut out: Vec<(usize, f64)> = row.iter().map(|&(q, w)| (q, -w)).collect();
            out.push((p, graph.row_sum(p)));
            out
        })
        .collect();
    CsrMatrix::from_rows(graph.len(), rows)
}

/// `L_IFM = (D_CM - W_CM)^T (D_CM - W_CM) + sigma_uu (D_UU - W_UU) + sigma_l (D_L - W_L)`.
pub fn assemble_flow_laplacian(
    cm: &FlowGraph,
    intra_u: &FlowGraph,
    local: &LocalAffinity,
    params: &Params,
) -> Result<CsrMatrix> {
    let n = local.grid().len();
    for (name, len) in [("color-mixture", cm.len()), ("intra-unknown", intra_u.len())] {
        if len != n {
            return Err(MattingError::InvalidInput(format!(
                "{name} flow covers {len} pixels but the local flow covers {n}"
            )));
        }
    }
    let r = graph_laplacian(cm)?;
    let rtr = r.transpose().matmul(&r)?;
    let uu = graph_laplacian(intra_u)?;
    let l = local.laplacian()?;
    CsrMatrix::linear_combination(&[(1.0, &rtr), (params.sigma_uu, &uu), (params.sigma_l, &l)])
}

/// A symmetric system `A x = b` together with its warm start.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub initial: Vec<f64>,
}

impl SparseSystem {
    /// Unclamped PCG solution.
    pub fn solve(&self, params: &Params) -> Result<(Vec<f64>, SolveReport)> {
        pcg::solve(
            &self.matrix,
            &self.rhs,
            self.initial.clone(),
            params.pcg_tol,
            params.pcg_max_iter,
        )
    }
}

fn check_len(what: &str, len: usize, n: usize) -> Result<()> {
    if len == n {
        Ok(())
    } else {
        Err(MattingError::InvalidInput(format!(
            "{what} has {len} entries for {n} pixels"
        )))
    }
}

fn with_diagonal(l: &CsrMatrix, diag: &[f64]) -> Result<CsrMatrix> {
    CsrMatrix::linear_combination(&[(1.0, l), (1.0, &CsrMatrix::from_diagonal(diag))])
}

/// `(L + lambda T + sigma_ku H) alpha = (lambda T + sigma_ku H) w^F`.
pub fn e1_system(l: &CsrMatrix, ktou: &KtoUResult, trimap: &Trimap, params: &Params) -> Result<SparseSystem> {
    let n = trimap.grid().len();
    check_len("the flow Laplacian", l.nrows(), n)?;
    let masks = region_masks(trimap);
    if masks.foreground.is_empty() {
        return Err(MattingError::EmptyRegion("foreground (use the E2 system)"));
    }
    if masks.background.is_empty() {
        return Err(MattingError::EmptyRegion("background (use the E2 system)"));
    }
    let wf = ktou.fg_weights(trimap);
    let eta = ktou.confidences(n);
    let diag: Vec<f64> = trimap
        .labels()
        .iter()
        .zip(&eta)
        .map(|(r, e)| {
            if r.is_known() {
                params.lambda
            } else {
                params.sigma_ku * e
            }
        })
        .collect();
    let rhs = diag.iter().zip(&wf).map(|(d, w)| d * w).collect();
    Ok(SparseSystem {
        matrix: with_diagonal(l, &diag)?,
        rhs,
        initial: wf,
    })
}

/// `(L + lambda T) alpha = lambda T alpha_K`.
pub fn e2_system(l: &CsrMatrix, trimap: &Trimap, params: &Params) -> Result<SparseSystem> {
    let n = trimap.grid().len();
    check_len("the flow Laplacian", l.nrows(), n)?;
    if trimap.count(Region::Unknown) == n {
        return Err(MattingError::EmptyRegion("known"));
    }
    let alpha_k = trimap.known_alpha();
    let diag: Vec<f64> = trimap
        .labels()
        .iter()
        .map(|r| if r.is_known() { params.lambda } else { 0.0 })
        .collect();
    let rhs = diag.iter().zip(&alpha_k).map(|(d, a)| d * a).collect();
    let initial = trimap
        .labels()
        .iter()
        .zip(&alpha_k)
        .map(|(r, a)| if r.is_known() { *a } else { 0.5 })
        .collect();
    Ok(SparseSystem {
        matrix: with_diagonal(l, &diag)?,
        rhs,
        initial,
    })
}

/// `(L + lambda T + sigma_r H) alpha = lambda T alpha_K + sigma_r H alpha_hat` with
/// `H = diag(eta_hat)` restricted to unknown pixels.
pub fn regularization_system(
    l: &CsrMatrix,
    trimap: &Trimap,
    alpha_hat: &Matte,
    eta_hat: &[f64],
    params: &Params,
) -> Result<SparseSystem> {
    let n = trimap.grid().len();
    trimap.grid().ensure_same(alpha_hat.grid())?;
    check_len("the confidence map", eta_hat.len(), n)?;
    if let Some(bad) = eta_hat.iter().find(|e| !(0.0..=1.0).contains(*e)) {
        return Err(MattingError::InvalidInput(format!("confidence {bad} outside [0, 1]")));
    }
    let mut system = e2_system(l, trimap, params)?;
    let loyalty: Vec<f64> = trimap
        .labels()
        .iter()
        .zip(eta_hat)
        .map(|(r, e)| if r.is_known() { 0.0 } else { params.sigma_r * e })
        .collect();
    system.matrix = with_diagonal(&system.matrix, &loyalty)?;
    for p in 0..n {
        if !trimap.label(p).is_known() {
            system.rhs[p] += loyalty[p] * alpha_hat.value(p);
            // zero confidence keeps the plain warm start, so the solve repeats the E2 one exactly
            system.initial[p] += eta_hat[p] * (alpha_hat.value(p) - system.initial[p]);
        }
    }
    Ok(system)
}

fn solve_clamped(system: SparseSystem, trimap: &Trimap, params: &Params) -> Result<(Matte, SolveReport)> {
    let (alpha, report) = system.solve(params)?;
    debug!("solve: {report}");
    Ok((Matte::clamped(trimap.width(), trimap.height(), alpha)?, report))
}

/// Minimizes the energy with the known-to-unknown flow; the matte is clamped to `[0, 1]`.
pub fn solve_e1(l: &CsrMatrix, ktou: &KtoUResult, trimap: &Trimap, params: &Params) -> Result<(Matte, SolveReport)> {
    solve_clamped(e1_system(l, ktou, trimap, params)?, trimap, params)
}

/// Minimizes the energy without the known-to-unknown flow; the matte is clamped to `[0, 1]`.
pub fn solve_e2(l: &CsrMatrix, trimap: &Trimap, params: &Params) -> Result<(Matte, SolveReport)> {
    solve_clamped(e2_system(l, trimap, params)?, trimap, params)
}

/// Regularizes an external estimate `alpha_hat` with per-pixel confidences `eta_hat`.
pub fn regularize_matte(
    l: &CsrMatrix,
    trimap: &Trimap,
    alpha_hat: &Matte,
    eta_hat: &[f64],
    params: &Params,
) -> Result<(Matte, SolveReport)> {
    solve_clamped(
        regularization_system(l, trimap, alpha_hat, eta_hat, params)?,
        trimap,
        params,
    )
}

/// Individual terms of the alpha energy, each written as a plain sum over pixels or pairs.
///
/// Pairwise terms count every unordered pair once, which makes the total equal to the
/// quadratic form minimized by the solvers.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyTerms {
    pub color_mixture: f64,
    pub known_to_unknown: f64,
    pub intra_unknown: f64,
    pub local: f64,
    pub known: f64,
}

impl EnergyTerms {
    /// Weighted total; the known-to-unknown term is left out when `with_ktou` is false.
    pub fn total(&self, params: &Params, with_ktou: bool) -> f64 {
        let ku = if with_ktou {
            params.sigma_ku * self.known_to_unknown
        } else {
            0.0
        };
        self.color_mixture
            + ku
            + params.sigma_uu * self.intra_unknown
            + params.sigma_l * self.local
            + params.lambda * self.known
    }
}

/// The flows needed by the alpha energies.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaFlows {
    pub color_mixture: FlowGraph,
    pub intra_unknown: FlowGraph,
    pub local: LocalAffinity,
}

impl AlphaFlows {
    /// Builds the color-mixture, intra-unknown and local flows; `trimap` must have unknown pixels.
    pub fn build(image: &ImageRgb, trimap: &Trimap, params: &Params) -> Result<Self> {
        let n = image.grid().len();
        let color_mixture = build_cm_flow(image, trimap, params)?;
        let intra_unknown = if trimap.count(Region::Unknown) >= 2 {
            build_intra_u_flow(image, trimap, params)?
        } else {
            FlowGraph::empty(n)
        };
        let local = build_local_flow(image, trimap, params)?;
        Ok(Self {
            color_mixture,
            intra_unknown,
            local,
        })
    }

    pub fn laplacian(&self, params: &Params) -> Result<CsrMatrix> {
        assemble_flow_laplacian(&self.color_mixture, &self.intra_unknown, &self.local, params)
    }

    /// Evaluates every energy term at `alpha`. `ktou` supplies `(w^F, eta)` over the grid.
    pub fn energy(&self, alpha: &[f64], trimap: &Trimap, ktou: Option<(&[f64], &[f64])>) -> EnergyTerms {
        let mut terms = EnergyTerms::default();
        for (p, row) in self.color_mixture.rows() {
            if row.is_empty() {
                continue;
            }
            let mix: f64 = row.iter().map(|&(q, w)| w * alpha[q]).sum();
            let r = self.color_mixture.row_sum(p) * alpha[p] - mix;
            terms.color_mixture += r * r;
        }
        if let Some((wf, eta)) = ktou {
            for p in 0..alpha.len() {
                if !trimap.label(p).is_known() {
                    terms.known_to_unknown += eta[p] * (alpha[p] - wf[p]).powi(2);
                }
            }
        }
        for (p, row) in self.intra_unknown.rows() {
            for &(q, w) in row {
                if q > p {
                    terms.intra_unknown += w * (alpha[p] - alpha[q]).powi(2);
                }
            }
        }
        for p in 0..alpha.len() {
            for (q, w) in self.local.neighbors(p) {
                if q > p {
                    terms.local += w * (alpha[p] - alpha[q]).powi(2);
                }
            }
        }
        for (p, r) in trimap.labels().iter().enumerate() {
            if let Some(a) = r.known_alpha() {
                terms.known += (alpha[p] - a).powi(2);
            }
        }
        terms
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolveMode {
    /// Pick the energy with the histogram classifier.
    #[default]
    Auto,
    ForceE1,
    ForceE2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PipelineOptions {
    pub trim: bool,
    pub mode: SolveMode,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            trim: true,
            mode: SolveMode::Auto,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub matte: Matte,
    /// `None` when the trimap left nothing to solve.
    pub report: Option<SolveReport>,
    pub decision: Option<TransparencyDecision>,
    pub trimmed: Trimap,
    pub used_e2: bool,
    pub flows: Option<AlphaFlows>,
    /// Wall time per stage in seconds.
    pub timings: Vec<(&'static str, f64)>,
}

enum Objective<'a> {
    Alpha(SolveMode),
    Regularize { alpha_hat: &'a Matte, eta_hat: &'a [f64] },
}

/// Full alpha estimation: trimming, flows, energy choice, solve and post-processing.
pub fn run_pipeline(
    image: &ImageRgb,
    trimap: &Trimap,
    params: &Params,
    options: PipelineOptions,
) -> Result<PipelineOutput> {
    run(image, trimap, params, options.trim, Objective::Alpha(options.mode))
}

/// Same stages as [`run_pipeline`], but the solve pulls the matte towards `alpha_hat`
/// wherever `eta_hat` is positive. An all-zero `eta_hat` reproduces the forced E2 result.
pub fn run_regularization(
    image: &ImageRgb,
    trimap: &Trimap,
    alpha_hat: &Matte,
    eta_hat: &[f64],
    params: &Params,
    trim: bool,
) -> Result<PipelineOutput> {
    image.grid().ensure_same(alpha_hat.grid())?;
    check_len("the confidence map", eta_hat.len(), image.grid().len())?;
    run(
        image,
        trimap,
        params,
        trim,
        Objective::Regularize { alpha_hat, eta_hat },
    )
}

fn run(
    image: &ImageRgb,
    trimap: &Trimap,
    params: &Params,
    trim: bool,
    objective: Objective<'_>,
) -> Result<PipelineOutput> {
    params.validate()?;
    image.grid().ensure_same(trimap.grid())?;
    let mut timings = Vec::new();
    let clock = Instant::now();

    let (trimmed, edge_trimmed) = if trim {
        let edge = edge_trim(image, trimap, params)?;
        let patch = patch_trim(image, &edge, params)?;
        (patch, Some(edge))
    } else {
        (trimap.clone(), None)
    };
    timings.push(("trim_seconds", clock.elapsed().as_secs_f64()));

    let masks = region_masks(&trimmed);
    if masks.unknown.is_empty() {
        return Ok(PipelineOutput {
            matte: Matte::from_trimap(&trimmed),
            report: None,
            decision: None,
            trimmed,
            used_e2: false,
            flows: None,
            timings,
        });
    }
    if masks.foreground.is_empty() && masks.background.is_empty() {
        return Err(MattingError::EmptyRegion("known"));
    }

    let clock = Instant::now();
    let flows = AlphaFlows::build(image, &trimmed, params)?;
    let l = flows.laplacian(params)?;
    timings.push(("flow_seconds", clock.elapsed().as_secs_f64()));

    let one_sided = masks.foreground.is_empty() || masks.background.is_empty();
    let mut decision = None;
    let mode = match objective {
        Objective::Alpha(mode) => mode,
        Objective::Regularize { .. } => SolveMode::ForceE2,
    };
    let use_e2 = match mode {
        SolveMode::ForceE2 => true,
        _ if one_sided => {
            warn!("only one known region is present; solving without the known-to-unknown flow");
            true
        }
        SolveMode::ForceE1 => false,
        SolveMode::Auto => {
            let d = classify_transparency(image, &trimmed, params)?;
            debug!("histogram residual {}", d.fit.e);
            decision = Some(d);
            d.use_e2
        }
    };

    let clock = Instant::now();
    let (matte, report) = if let Objective::Regularize { alpha_hat, eta_hat } = objective {
        regularize_matte(&l, &trimmed, alpha_hat, eta_hat, params)?
    } else if use_e2 {
        solve_e2(&l, &trimmed, params)?
    } else {
        let ktou = build_ktou_flow(image, &trimmed, params)?;
        solve_e1(&l, &ktou, &trimmed, params)?
    };
    timings.push(("solve_seconds", clock.elapsed().as_secs_f64()));

    // the input known region and its edge-trimmed extension are copied to the output
    let mut alpha = matte.into_values();
    let fixed = edge_trimmed.as_ref().unwrap_or(trimap);
    for (p, a) in alpha.iter_mut().enumerate() {
        if let Some(v) = fixed.label(p).known_alpha() {
            *a = v;
        }
    }
    Ok(PipelineOutput {
        matte: Matte::clamped(image.width(), image.height(), alpha)?,
        report: Some(report),
        decision,
        trimmed,
        used_e2: use_e2,
        flows: Some(flows),
        timings,
    })
}
