//! Image-plane gradients from the 3-tap Farid-Simoncelli derivative pair.

/// Smoothing (prefilter) taps.
pub const SMOOTH_TAPS: [f64; 3] = [0.229879, 0.540242, 0.229879];
/// Derivative taps, applied as a correlation so that an increasing ramp has a positive slope.
pub const DERIVATIVE_TAPS: [f64; 3] = [-0.425287, 0.0, 0.425287];

/// Per-pixel `(d/dx, d/dy)` of a scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    width: usize,
    height: usize,
    dx: Vec<f64>,
    dy: Vec<f64>,
}

impl GradientField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn at(&self, p: usize) -> [f64; 2] {
        [self.dx[p], self.dy[p]]
    }

    pub fn dx(&self) -> &[f64] {
        &self.dx
    }

    pub fn dy(&self) -> &[f64] {
        &self.dy
    }

    /// Derivative at `p` along the unit vector `u`.
    #[inline]
    pub fn directional(&self, p: usize, u: [f64; 2]) -> f64 {
        self.dx[p] * u[0] + self.dy[p] * u[1]
    }
}

fn correlate_rows(values: &[f64], width: usize, height: usize, taps: &[f64; 3]) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    for y in 0..height {
        let row = &values[y * width..(y + 1) * width];
        for x in 0..width {
            let left = row[x.saturating_sub(1)];
            let right = row[(x + 1).min(width - 1)];
            out[y * width + x] = taps[0] * left + taps[1] * row[x] + taps[2] * right;
        }
    }
    out
}

fn correlate_cols(values: &[f64], width: usize, height: usize, taps: &[f64; 3]) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    for y in 0..height {
        let up = y.saturating_sub(1);
        let down = (y + 1).min(height - 1);
        for x in 0..width {
            out[y * width + x] =
                taps[0] * values[up * width + x] + taps[1] * values[y * width + x] + taps[2] * values[down * width + x];
        }
    }
    out
}

/// Separable gradient of a row-major `width x height` field with edge replication.
///
/// # Panics
/// If `values.len() != width * height`.
pub fn compute_gradients(values: &[f64], width: usize, height: usize) -> GradientField {
    assert_eq!(values.len(), width * height, "field size does not match its dimensions");
    if values.is_empty() {
        return GradientField {
            width,
            height,
            dx: Vec::new(),
            dy: Vec::new(),
        };
    }
    let dx = correlate_cols(
        &correlate_rows(values, width, height, &DERIVATIVE_TAPS),
        width,
        height,
        &SMOOTH_TAPS,
    );
    let dy = correlate_rows(
        &correlate_cols(values, width, height, &DERIVATIVE_TAPS),
        width,
        height,
        &SMOOTH_TAPS,
    );
    GradientField { width, height, dx, dy }
}
