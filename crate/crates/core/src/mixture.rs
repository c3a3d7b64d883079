//! Sum-to-one reconstruction weights: express a target vector as an affine combination of
//! its neighbors by solving the regularized neighborhood Gram system.

use nalgebra::{DMatrix, DVector};

use crate::error::{MattingError, Result};
use crate::types::Rgb;

/// Combined weights below this magnitude leave the endpoint color undefined.
pub const ENDPOINT_EPS: f64 = 1e-8;

/// Solves for weights `w` minimizing `|target - sum_i w_i n_i|^2` subject to `sum_i w_i = 1`.
///
/// The Gram matrix `G_ij = (target - n_i) . (target - n_j)` is conditioned with
/// `regularization * I`, `G w = 1` is solved, and `w` is rescaled to unit sum.
/// Weights are not clamped and may be negative.
pub fn solve_mixture_weights<V: AsRef<[f64]>>(
    target: &[f64],
    neighbors: &[V],
    regularization: f64,
) -> Result<Vec<f64>> {
    let k = neighbors.len();
    if k == 0 {
        return Err(MattingError::InvalidInput(
            "mixture weights need at least one neighbor".into(),
        ));
    }
    if k == 1 {
        return Ok(vec![1.0]);
    }
    let dim = target.len();
    let mut diffs = DMatrix::<f64>::zeros(dim, k);
    for (j, n) in neighbors.iter().enumerate() {
        let n = n.as_ref();
        if n.len() != dim {
            return Err(MattingError::InvalidInput(format!(
                "neighbor has dimension {}, target has {dim}",
                n.len()
            )));
        }
        for d in 0..dim {
            diffs[(d, j)] = target[d] - n[d];
        }
    }
    let mut gram = diffs.transpose() * &diffs;
    for i in 0..k {
        gram[(i, i)] += regularization;
    }
    let chol = gram.cholesky().ok_or(MattingError::Singular)?;
    let w = chol.solve(&DVector::from_element(k, 1.0));
    let total: f64 = w.iter().sum();
    if !total.is_finite() || total == 0.0 {
        return Err(MattingError::Singular);
    }
    Ok(w.iter().map(|v| v / total).collect())
}

/// Splits weights solved over `fg_count` foreground neighbors followed by background
/// neighbors into the total foreground and background weight.
pub fn split_combined_weights(weights: &[f64], fg_count: usize) -> (f64, f64) {
    let fg_count = fg_count.min(weights.len());
    let (fg, bg) = weights.split_at(fg_count);
    (fg.iter().sum(), bg.iter().sum())
}

/// Foreground and background colors implied by a joint mixture solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndpointColors {
    /// `None` when the total foreground weight vanishes.
    pub foreground: Option<Rgb>,
    pub background: Option<Rgb>,
}

/// Weighted mean color of each side, normalized by that side's total weight.
pub fn mixture_endpoint_colors(weights: &[f64], colors: &[Rgb], fg_count: usize) -> EndpointColors {
    debug_assert_eq!(weights.len(), colors.len());
    let fg_count = fg_count.min(weights.len());
    let side = |range: std::ops::Range<usize>| {
        let total: f64 = weights[range.clone()].iter().sum();
        if total.abs() < ENDPOINT_EPS {
            return None;
        }
        let mut c = [0.0; 3];
        for i in range {
            for (ch, v) in c.iter_mut().enumerate() {
                *v += weights[i] * colors[i][ch];
            }
        }
        Some(c.map(|v| v / total))
    };
    EndpointColors {
        foreground: side(0..fg_count),
        background: side(fg_count..weights.len()),
    }
}
