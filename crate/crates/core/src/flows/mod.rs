//! The four inter-pixel flows that make up the matting energy.

mod cm;
mod intra_u;
mod ktou;
mod local;

pub use cm::build_cm_flow;
pub use intra_u::build_intra_u_flow;
pub use ktou::{build_ktou_flow, KtoUEstimate, KtoUResult};
pub use local::{build_local_flow, LocalAffinity};

pub(crate) use cm::mixture_graph;
pub(crate) use intra_u::similarity_graph;

/// `max(1 - |a - b|_1, 0)`.
#[inline]
pub fn similarity_weight(a: &[f64], b: &[f64]) -> f64 {
    let l1: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
    (1.0 - l1).max(0.0)
}
