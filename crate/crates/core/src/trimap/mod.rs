//! Trimap preprocessing: growing the known regions before the solve, and choosing between
//! the systems with and without the known-to-unknown flow.

mod edge;
mod patch;
mod transparency;

pub use edge::edge_trim;
pub use patch::{bhattacharyya_distance, patch_statistics, patch_trim, PatchStats};
pub use transparency::{
    classify_transparency, color_histogram, fit_histogram_mixture, HistogramFit, TransparencyDecision,
};
