//! Alpha matting through information flows.
//!
//! Opacity is propagated from the known regions of a trimap into the unknown region by
//! minimizing a sum of quadratic energies, one per kind of flow: color-mixture,
//! known-to-unknown, intra-unknown and local. The same machinery regularizes mattes from
//! other estimators and recovers unmixed foreground and background colors.
//!
//! ```no_run
//! use flowmatte::{io, run_pipeline, Params, PipelineOptions};
//!
//! let image = io::load_image("input.png")?;
//! let trimap = io::load_trimap("trimap.png")?;
//! let out = run_pipeline(&image, &trimap, &Params::default(), PipelineOptions::default())?;
//! io::save_matte(&out.matte, "alpha.png", io::BitDepth::Eight)?;
//! # Ok::<(), flowmatte::MattingError>(())
//! ```

pub mod color;
pub mod error;
pub mod flows;
pub mod io;
pub mod knn;
pub mod mixture;
pub mod params;
pub mod pcg;
pub mod solver;
pub mod sparse;
pub mod synthetic;
pub mod trimap;
pub mod types;

pub use color::{composite, estimate_colors, LayerColors};
pub use error::{MattingError, Result};
pub use knn::KnnMode;
pub use params::Params;
pub use pcg::SolveReport;
pub use solver::{
    regularize_matte, run_pipeline, run_regularization, solve_e1, solve_e2, PipelineOptions, PipelineOutput, SolveMode,
};
pub use types::*;
