use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::error::Result;
use crate::knn::{Features, KnnIndex, KnnMode};
use crate::params::Params;
use crate::types::{region_masks, ImageRgb, Region, Trimap};

/// Gaussian fit to the colors of the 3x3 window around a pixel (borders replicated).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchStats {
    pub mean: Vector3<f64>,
    /// Biased window covariance plus the configured regularizer on the diagonal.
    pub cov: Matrix3<f64>,
    det: f64,
}

impl PatchStats {
    pub fn new(mean: Vector3<f64>, cov: Matrix3<f64>) -> Self {
        Self {
            mean,
            cov,
            det: cov.determinant(),
        }
    }
}

pub fn patch_statistics(image: &ImageRgb, cov_reg: f64) -> Vec<PatchStats> {
    let (w, h) = (image.width() as isize, image.height() as isize);
    (0..image.grid().len())
        .into_par_iter()
        .map(|p| {
            let (px, py) = ((p as isize) % w, (p as isize) / w);
            let mut samples = [Vector3::zeros(); 9];
            let mut i = 0;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let x = (px + dx).clamp(0, w - 1) as usize;
                    let y = (py + dy).clamp(0, h - 1) as usize;
                    let c = image.at(x, y);
                    samples[i] = Vector3::new(c[0], c[1], c[2]);
                    i += 1;
                }
            }
            let mean = samples.iter().sum::<Vector3<f64>>() / 9.0;
            let mut cov = Matrix3::zeros();
            for s in &samples {
                let d = s - mean;
                cov += d * d.transpose();
            }
            cov /= 9.0;
            cov += Matrix3::identity() * cov_reg;
            PatchStats::new(mean, cov)
        })
        .collect()
}

/// Bhattacharyya distance between two Gaussians.
pub fn bhattacharyya_distance(a: &PatchStats, b: &PatchStats) -> f64 {
    let avg = (a.cov + b.cov) * 0.5;
    let Some(inv) = avg.try_inverse() else {
        return f64::INFINITY;
    };
    let d = a.mean - b.mean;
    let mahalanobis = (d.transpose() * inv * d)[0];
    let log_term = (avg.determinant() / (a.det * b.det).sqrt()).ln();
    (mahalanobis / 8.0 + log_term / 2.0).max(0.0)
}

/// Pixels of `region` whose whole 3x3 window (borders replicated) shares their label.
///
/// Windows straddling the unknown boundary mix both sides and would match unknown patches
/// spuriously; they are used only when a region has no clean window at all.
fn clean_patches(trimap: &Trimap, region: &[usize]) -> Vec<usize> {
    let (w, h) = (trimap.width() as isize, trimap.height() as isize);
    let clean: Vec<usize> = region
        .iter()
        .copied()
        .filter(|&p| {
            let label = trimap.label(p);
            let (px, py) = ((p as isize) % w, (p as isize) / w);
            (-1..=1).all(|dy| {
                (-1..=1).all(|dx| {
                    let x = (px + dx).clamp(0, w - 1);
                    let y = (py + dy).clamp(0, h - 1);
                    trimap.label((y * w + x) as usize) == label
                })
            })
        })
        .collect();
    if clean.is_empty() {
        region.to_vec()
    } else {
        clean
    }
}

/// Relabels unknown pixels whose patch strongly matches one known side and matches the
/// other side poorly.
///
/// For each side, the `patch_trim_candidates` known patches with the closest means are
/// compared (only windows lying entirely in that side, when there are any) and the smallest Bhattacharyya distance is the match score. A pixel becomes
/// foreground when `b_F < tau_c` and `b_B > tau_f`, and background symmetrically.
pub fn patch_trim(image: &ImageRgb, trimap: &Trimap, params: &Params) -> Result<Trimap> {
    image.grid().ensure_same(trimap.grid())?;
    let masks = region_masks(trimap);
    if masks.unknown.is_empty() {
        return Ok(trimap.clone());
    }
    let stats = patch_statistics(image, params.patch_cov_reg);
    let mean_index = |pixels: &[usize]| -> Result<Option<KnnIndex>> {
        if pixels.is_empty() {
            return Ok(None);
        }
        let data = pixels.iter().flat_map(|&p| stats[p].mean.iter().copied()).collect();
        let features = Features::from_raw(3, pixels.to_vec(), data)?;
        Ok(Some(KnnIndex::new(&features, KnnMode::Exact)))
    };
    let fg_index = mean_index(&clean_patches(trimap, &masks.foreground))?;
    let bg_index = mean_index(&clean_patches(trimap, &masks.background))?;

    let score = |index: &Option<KnnIndex>, p: usize| -> Result<f64> {
        let Some(index) = index else {
            return Ok(f64::INFINITY);
        };
        let mean = stats[p].mean;
        let candidates = index.query_pixels(mean.as_slice(), params.patch_trim_candidates, None)?;
        Ok(candidates
            .into_iter()
            .map(|q| bhattacharyya_distance(&stats[p], &stats[q]))
            .fold(f64::INFINITY, f64::min))
    };

    let updates: Vec<(usize, Region)> = masks
        .unknown
        .par_iter()
        .map(|&p| {
            let bf = score(&fg_index, p)?;
            let bb = score(&bg_index, p)?;
            Ok(if bf < params.tau_c && bb > params.tau_f {
                Some((p, Region::Foreground))
            } else if bb < params.tau_c && bf > params.tau_f {
                Some((p, Region::Background))
            } else {
                None
            })
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    let mut out = trimap.clone();
    for (p, r) in updates {
        out.set(p, r);
    }
    Ok(out)
}
