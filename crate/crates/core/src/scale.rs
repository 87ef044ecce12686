//! Per-frame estimation of the unknown SfM depth scale.
//!
//! Monocular reconstruction recovers scene structure only up to a global
//! scale factor, and that factor drifts along the trajectory. With RGBD and
//! SfM depth co-registered, the scale is observable wherever both have valid
//! measurements. The default estimator minimizes the sum of squared depth
//! errors `e(a) = sum (d - a*mu)^2` over the overlap, whose closed-form
//! minimizer is `a = sum(d*mu) / sum(mu^2)`; a mean-of-ratios estimator is
//! kept as an alternative. Frames with too little overlap fall back to the
//! previous frame's estimate.

use crate::error::{Error, Result};
use crate::raster::{DepthRaster, VarianceRaster};

/// Scale estimator selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleMode {
    /// Exact minimizer of the squared depth error.
    LeastSquares,
    /// Mean of per-pixel depth ratios d/mu.
    MeanRatio,
    /// Mean of ratios after discarding the top and bottom 5%.
    TrimmedRatio,
}

impl std::str::FromStr for ScaleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "least_squares" => Ok(ScaleMode::LeastSquares),
            "mean_ratio" => Ok(ScaleMode::MeanRatio),
            other => Err(Error::Config(format!(
                "unknown scale mode '{other}' (expected least_squares|mean_ratio)"
            ))),
        }
    }
}

impl std::fmt::Display for ScaleMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScaleMode::LeastSquares => "least_squares",
            ScaleMode::MeanRatio => "mean_ratio",
            ScaleMode::TrimmedRatio => "trimmed_ratio",
        })
    }
}

/// Default minimum overlap before an estimate is trusted.
pub const DEFAULT_MIN_SUPPORT: usize = 50;

/// Fraction trimmed from each tail in [`ScaleMode::TrimmedRatio`].
const TRIM_FRACTION: f64 = 0.05;

/// Result of a per-frame scale estimation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleEstimate {
    /// Multiplier that brings SfM depths to metric scale.
    pub alpha: f64,
    /// Number of overlap pixels the estimate was computed from.
    pub support: usize,
    pub mode: ScaleMode,
    /// True when the value was carried over from a previous frame.
    pub fallback: bool,
}

/// Pixels valid in both rasters with both depths positive.
pub fn valid_overlap(rgbd: &DepthRaster, sfm: &DepthRaster) -> Result<Vec<(u32, u32)>> {
    rgbd.check_same_shape(sfm)?;
    let mut overlap = Vec::new();
    for (col, row, d) in rgbd.iter_valid() {
        if d > 0.0 {
            if let Some(mu) = sfm.get(col, row) {
                if mu > 0.0 {
                    overlap.push((col, row));
                }
            }
        }
    }
    Ok(overlap)
}

/// Estimates the SfM scale over the valid overlap of the two rasters.
///
/// Falls back to `prev` when fewer than `min_support` pixels overlap; with no
/// previous estimate that is an error and the caller should treat the frame
/// as RGBD-only.
pub fn estimate_scale(
    rgbd: &DepthRaster,
    sfm: &DepthRaster,
    mode: ScaleMode,
    min_support: usize,
    prev: Option<&ScaleEstimate>,
) -> Result<ScaleEstimate> {
    let overlap = valid_overlap(rgbd, sfm)?;
    if overlap.len() < min_support {
        return match prev {
            Some(p) => Ok(ScaleEstimate {
                fallback: true,
                ..*p
            }),
            None => Err(Error::NoScale {
                support: overlap.len(),
                min_support,
            }),
        };
    }

    let alpha = match mode {
        ScaleMode::LeastSquares => {
            let mut num = 0.0;
            let mut den = 0.0;
            for &(c, r) in &overlap {
                let d = rgbd.get(c, r).unwrap();
                let mu = sfm.get(c, r).unwrap();
                num += d * mu;
                den += mu * mu;
            }
            num / den
        }
        ScaleMode::MeanRatio => {
            let sum: f64 = overlap
                .iter()
                .map(|&(c, r)| rgbd.get(c, r).unwrap() / sfm.get(c, r).unwrap())
                .sum();
            sum / overlap.len() as f64
        }
        ScaleMode::TrimmedRatio => {
            let mut ratios: Vec<f64> = overlap
                .iter()
                .map(|&(c, r)| rgbd.get(c, r).unwrap() / sfm.get(c, r).unwrap())
                .collect();
            ratios.sort_by(|a, b| a.total_cmp(b));
            let trim = (ratios.len() as f64 * TRIM_FRACTION) as usize;
            let kept = &ratios[trim..ratios.len() - trim];
            kept.iter().sum::<f64>() / kept.len() as f64
        }
    };

    Ok(ScaleEstimate {
        alpha,
        support: overlap.len(),
        mode,
        fallback: false,
    })
}

/// Scales an SfM depth raster to metric units: depth by alpha, variance by
/// alpha squared. Valid masks are preserved exactly.
pub fn apply_scale(
    sfm_depth: &DepthRaster,
    sfm_var: &VarianceRaster,
    est: &ScaleEstimate,
) -> (DepthRaster, VarianceRaster) {
    let mut depth = sfm_depth.clone();
    for v in depth.values_mut() {
        *v *= est.alpha;
    }
    let mut var = sfm_var.clone();
    let a2 = est.alpha * est.alpha;
    for v in var.values_mut() {
        *v *= a2;
    }
    (depth, var)
}
