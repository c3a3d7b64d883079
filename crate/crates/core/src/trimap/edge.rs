use rayon::prelude::*;

use crate::error::Result;
use crate::params::Params;
use crate::types::{ImageRgb, Region, Trimap};

/// Grows F and B into the unknown region one ring per iteration.
///
/// An unknown pixel on the current known frontier becomes foreground when some pixel of
/// the original foreground lies within `edge_trim_radius` pixels and `edge_trim_color` RGB
/// distance of it and no such background pixel exists (and symmetrically for background).
/// Stops at a fixpoint or after `edge_trim_radius` rings. Known pixels never change.
pub fn edge_trim(image: &ImageRgb, trimap: &Trimap, params: &Params) -> Result<Trimap> {
    image.grid().ensure_same(trimap.grid())?;
    let (w, h) = (trimap.width() as isize, trimap.height() as isize);
    let radius = params.edge_trim_radius as isize;
    let max_d2 = radius * radius;
    let max_c2 = params.edge_trim_color * params.edge_trim_color;
    let colors = image.pixels();

    let matches = |p: usize, region: Region| {
        let (px, py) = ((p as isize) % w, (p as isize) / w);
        let cp = colors[p];
        for dy in -radius..=radius {
            let y = py + dy;
            if y < 0 || y >= h {
                continue;
            }
            for dx in -radius..=radius {
                let x = px + dx;
                if x < 0 || x >= w || dx * dx + dy * dy > max_d2 {
                    continue;
                }
                let q = (y * w + x) as usize;
                if trimap.label(q) != region {
                    continue;
                }
                let cq = colors[q];
                let c2: f64 = (0..3).map(|c| (cp[c] - cq[c]) * (cp[c] - cq[c])).sum();
                if c2 <= max_c2 {
                    return true;
                }
            }
        }
        false
    };

    let mut current = trimap.clone();
    for _ in 0..params.edge_trim_radius {
        let frontier: Vec<usize> = (0..current.grid().len())
            .filter(|&p| current.label(p) == Region::Unknown && touches_known(&current, p))
            .collect();
        let updates: Vec<(usize, Region)> = frontier
            .par_iter()
            .filter_map(
                |&p| match (matches(p, Region::Foreground), matches(p, Region::Background)) {
                    (true, false) => Some((p, Region::Foreground)),
                    (false, true) => Some((p, Region::Background)),
                    _ => None,
                },
            )
            .collect();
        if updates.is_empty() {
            break;
        }
        for (p, r) in updates {
            current.set(p, r);
        }
    }
    Ok(current)
}

fn touches_known(trimap: &Trimap, p: usize) -> bool {
    let (w, h) = (trimap.width(), trimap.height());
    let (px, py) = (p % w, p / w);
    for y in py.saturating_sub(1)..=(py + 1).min(h - 1) {
        for x in px.saturating_sub(1)..=(px + 1).min(w - 1) {
            if trimap.label(y * w + x).is_known() {
                return true;
            }
        }
    }
    false
}
