//! Algorithm constants and their plain-text `key=value` configuration format.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{MattingError, Result};
use crate::knn::KnnMode;

/// Every tunable constant of the matting and color-estimation systems.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    /// Neighbors per unknown pixel for the color-mixture flow.
    pub k_cm: usize,
    /// Neighbors taken from each of F and B for the known-to-unknown flow.
    pub k_ku: usize,
    /// Neighbors per unknown pixel for the intra-unknown flow.
    pub k_uu: usize,
    pub sigma_ku: f64,
    pub sigma_uu: f64,
    pub sigma_l: f64,
    /// Weight of the known-alpha (and compositing) constraint.
    pub lambda: f64,
    /// Loyalty weight toward an external alpha estimate during regularization.
    pub sigma_r: f64,
    /// Bhattacharyya distance below which a patch is a strong match.
    pub tau_c: f64,
    /// Bhattacharyya distance above which a patch is no match.
    pub tau_f: f64,
    /// Conditioning added to the neighborhood Gram matrix of mixture solves.
    pub lle_reg: f64,
    pub cm_coord_scale: f64,
    pub ku_coord_scale: f64,
    pub uu_coord_scale: f64,
    /// Regularizer of the window covariance in the local matting affinity.
    pub laplacian_eps: f64,
    /// Relative residual `|b - A x| / |b|` at which conjugate gradients stop.
    pub pcg_tol: f64,
    pub pcg_max_iter: usize,
    /// Histogram residual above which the known-to-unknown flow is dropped.
    pub transparency_threshold: f64,
    /// Bins per channel of the joint color histogram.
    pub hist_bins: usize,
    /// Width in pixels of the known bands used for the F and B histograms.
    pub hist_band: usize,
    pub edge_trim_radius: usize,
    /// Maximum RGB distance for edge-based trimming.
    pub edge_trim_color: f64,
    /// Known patches with closest means examined per unknown pixel.
    pub patch_trim_candidates: usize,
    /// Added to each 3x3 window covariance before Bhattacharyya distances.
    pub patch_cov_reg: f64,
    pub knn_mode: KnnMode,
    /// Weak pull of layer colors toward the observed color; keeps the color system definite.
    pub color_prior: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            k_cm: 20,
            k_ku: 7,
            k_uu: 5,
            sigma_ku: 0.05,
            sigma_uu: 0.01,
            sigma_l: 1.0,
            lambda: 100.0,
            sigma_r: 0.05,
            tau_c: 0.25,
            tau_f: 0.9,
            lle_reg: 1e-3,
            cm_coord_scale: 1.0,
            ku_coord_scale: 10.0,
            uu_coord_scale: 1.0 / 20.0,
            laplacian_eps: 1e-7,
            pcg_tol: 1e-7,
            pcg_max_iter: 2000,
            transparency_threshold: 0.2,
            hist_bins: 16,
            hist_band: 20,
            edge_trim_radius: 9,
            edge_trim_color: 9.0 / 255.0,
            patch_trim_candidates: 20,
            patch_cov_reg: 1e-5,
            knn_mode: KnnMode::Exact,
            color_prior: 1e-5,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| MattingError::InvalidParam(format!("cannot parse {key}={value}")))
}

macro_rules! params_keys {
    ($($field:ident),* $(,)?) => {
        impl Params {
            /// All configuration keys, in report order.
            pub const KEYS: &'static [&'static str] = &[$(stringify!($field),)* "knn_max_checks"];

            /// Sets one parameter from its textual form.
            pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
                let value = value.trim();
                match key.trim() {
                    $(stringify!($field) => self.$field = parse_value(key, value)?,)*
                    "knn_max_checks" => {
                        let checks: usize = parse_value(key, value)?;
                        self.knn_mode = if checks == 0 {
                            KnnMode::Exact
                        } else {
                            KnnMode::Approximate { max_checks: checks }
                        };
                    }
                    other => {
                        return Err(MattingError::InvalidParam(format!("unknown key `{other}`")))
                    }
                }
                Ok(())
            }

            /// `(key, value)` pairs in a form accepted back by [`Params::set`].
            pub fn entries(&self) -> Vec<(&'static str, String)> {
                let checks = match self.knn_mode {
                    KnnMode::Exact => 0,
                    KnnMode::Approximate { max_checks } => max_checks,
                };
                vec![$((stringify!($field), self.$field.to_string()),)* ("knn_max_checks", checks.to_string())]
            }
        }
    };
}

params_keys!(
    k_cm,
    k_ku,
    k_uu,
    sigma_ku,
    sigma_uu,
    sigma_l,
    lambda,
    sigma_r,
    tau_c,
    tau_f,
    lle_reg,
    cm_coord_scale,
    ku_coord_scale,
    uu_coord_scale,
    laplacian_eps,
    pcg_tol,
    pcg_max_iter,
    transparency_threshold,
    hist_bins,
    hist_band,
    edge_trim_radius,
    edge_trim_color,
    patch_trim_candidates,
    patch_cov_reg,
    color_prior,
);

impl Params {
    /// Applies `key=value` lines on top of `self`. Blank lines and `#` comments are skipped.
    pub fn apply_config(&mut self, text: &str) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| MattingError::InvalidParam(format!("line {}: expected key=value", lineno + 1)))?;
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn from_config_str(text: &str) -> Result<Self> {
        let mut params = Self::default();
        params.apply_config(text)?;
        params.validate()?;
        Ok(params)
    }

    pub fn from_config_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_config_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(MattingError::InvalidParam(msg));
        for (name, count) in [
            ("k_cm", self.k_cm),
            ("k_ku", self.k_ku),
            ("k_uu", self.k_uu),
            ("pcg_max_iter", self.pcg_max_iter),
            ("hist_bins", self.hist_bins),
            ("hist_band", self.hist_band),
            ("edge_trim_radius", self.edge_trim_radius),
            ("patch_trim_candidates", self.patch_trim_candidates),
        ] {
            if count == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        for (name, value) in [
            ("lambda", self.lambda),
            ("tau_c", self.tau_c),
            ("tau_f", self.tau_f),
            ("lle_reg", self.lle_reg),
            ("cm_coord_scale", self.cm_coord_scale),
            ("ku_coord_scale", self.ku_coord_scale),
            ("uu_coord_scale", self.uu_coord_scale),
            ("laplacian_eps", self.laplacian_eps),
            ("pcg_tol", self.pcg_tol),
            ("edge_trim_color", self.edge_trim_color),
            ("patch_cov_reg", self.patch_cov_reg),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return bad(format!("{name} must be positive, got {value}"));
            }
        }
        // a zero strength switches the corresponding flow off
        for (name, value) in [
            ("sigma_ku", self.sigma_ku),
            ("sigma_uu", self.sigma_uu),
            ("sigma_l", self.sigma_l),
            ("sigma_r", self.sigma_r),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return bad(format!("{name} must be non-negative, got {value}"));
            }
        }
        if self.tau_c >= self.tau_f {
            return bad(format!("tau_c ({}) must be below tau_f ({})", self.tau_c, self.tau_f));
        }
        if self.pcg_tol >= 1.0 {
            return bad(format!("pcg_tol must be below 1, got {}", self.pcg_tol));
        }
        if self.hist_bins > 256 {
            return bad(format!("hist_bins must be at most 256, got {}", self.hist_bins));
        }
        if !(self.transparency_threshold.is_finite() && self.transparency_threshold >= 0.0) {
            return bad("transparency_threshold must be non-negative".into());
        }
        if !(self.color_prior.is_finite() && self.color_prior >= 0.0) {
            return bad("color_prior must be non-negative".into());
        }
        Ok(())
    }
}

impl fmt::Display for Params {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (key, value) in self.entries() {
            writeln!(f, "{key}={value}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_published_constants() {
        let p = Params::default();
        assert_eq!((p.k_cm, p.k_ku, p.k_uu), (20, 7, 5));
        assert_eq!(p.sigma_ku, 0.05);
        assert_eq!(p.sigma_uu, 0.01);
        assert_eq!(p.sigma_l, 1.0);
        assert_eq!(p.lambda, 100.0);
        assert_eq!(p.sigma_r, 0.05);
        assert_eq!((p.tau_c, p.tau_f), (0.25, 0.9));
        assert_eq!(p.lle_reg, 1e-3);
        assert_eq!(
            (p.cm_coord_scale, p.ku_coord_scale, p.uu_coord_scale),
            (1.0, 10.0, 0.05)
        );
        p.validate().unwrap();
    }

    #[test]
    fn display_round_trips() {
        let p = Params {
            k_cm: 11,
            sigma_r: 1e4,
            edge_trim_color: 0.1234567891234,
            knn_mode: KnnMode::Approximate { max_checks: 64 },
            ..Params::default()
        };
        let back = Params::from_config_str(&p.to_string()).unwrap();
        assert_eq!(back, p);
        assert_eq!(Params::KEYS.len(), p.entries().len());
    }

    #[test]
    fn config_comments_and_errors() {
        let p = Params::from_config_str("# comment\n\nlambda = 50 # inline\n").unwrap();
        assert_eq!(p.lambda, 50.0);
        assert!(Params::from_config_str("nonsense=1").is_err());
        assert!(Params::from_config_str("lambda").is_err());
        assert!(Params::from_config_str("k_cm=abc").is_err());
        assert!(Params::from_config_str("tau_c=0.95").is_err());
        assert!(Params::from_config_str("k_uu=0").is_err());
    }
}
