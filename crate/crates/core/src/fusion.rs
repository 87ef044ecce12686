//! Per-pixel Gaussian fusion of RGBD and scale-corrected SfM depth.
//!
//! Where both sources measure a pixel, the fused depth is the posterior of
//! two independent Gaussians,
//!
//! ```text
//! mu    = (d * var_sfm + mu_sfm * var_rgbd) / (var_sfm + var_rgbd)
//! var   = var_rgbd * var_sfm / (var_rgbd + var_sfm)
//! ```
//!
//! evaluated in precision-weight form `w = 1/var` (algebraically identical,
//! robust to very large variances). The fused variance never exceeds the
//! smaller input variance. Pixels seen by only one source pass through, and
//! every pixel is labeled with its provenance.

use crate::error::{Error, Result};
use crate::raster::{DepthRaster, VarianceRaster};
use crate::scale::ScaleEstimate;

/// Which source(s) produced the depth at a pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    None,
    RgbdOnly,
    SfmOnly,
    Fused,
}

/// Per-pixel provenance labels for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ProvenanceMap {
    width: u32,
    height: u32,
    labels: Vec<Provenance>,
}

impl ProvenanceMap {
    pub fn new(width: u32, height: u32) -> Self {
        ProvenanceMap {
            width,
            height,
            labels: vec![Provenance::None; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, col: u32, row: u32) -> Provenance {
        self.labels[row as usize * self.width as usize + col as usize]
    }

    pub fn set(&mut self, col: u32, row: u32, label: Provenance) {
        self.labels[row as usize * self.width as usize + col as usize] = label;
    }

    pub fn labels(&self) -> &[Provenance] {
        &self.labels
    }

    /// Counts per label: (none, rgbd_only, sfm_only, fused).
    pub fn counts(&self) -> (usize, usize, usize, usize) {
        let mut n = (0, 0, 0, 0);
        for l in &self.labels {
            match l {
                Provenance::None => n.0 += 1,
                Provenance::RgbdOnly => n.1 += 1,
                Provenance::SfmOnly => n.2 += 1,
                Provenance::Fused => n.3 += 1,
            }
        }
        n
    }
}

/// Provenance counts and percentages for one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameStats {
    pub timestamp: f64,
    pub rgbd_only: usize,
    pub sfm_only: usize,
    pub fused: usize,
    pub none: usize,
}

impl FrameStats {
    /// Pixels carrying at least one measurement.
    pub fn total_measured(&self) -> usize {
        self.rgbd_only + self.sfm_only + self.fused
    }

    /// (rgbd_only%, sfm_only%, fused%) over measured pixels.
    pub fn percentages(&self) -> (f64, f64, f64) {
        let total = self.total_measured();
        if total == 0 {
            return (0.0, 0.0, 0.0);
        }
        let t = total as f64;
        (
            100.0 * self.rgbd_only as f64 / t,
            100.0 * self.sfm_only as f64 / t,
            100.0 * self.fused as f64 / t,
        )
    }
}

/// Optional consistency gate applied before fusing a pixel.
///
/// When enabled with factor k, a pixel whose sources disagree by more than
/// `k * sqrt(var_rgbd + var_sfm)` is not fused; the lower-variance source
/// passes through and labels the pixel. Off by default.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FusionGate {
    Off,
    KSigma(f64),
}

/// Fully fused output frame.
#[derive(Debug, Clone)]
pub struct FusedFrame {
    pub depth: DepthRaster,
    pub variance: VarianceRaster,
    pub provenance: ProvenanceMap,
    pub scale: Option<ScaleEstimate>,
    pub stats: FrameStats,
}

fn check_variance(var: f64) -> Result<f64> {
    if !(var > 0.0 && var.is_finite()) {
        return Err(Error::InvalidVariance(var));
    }
    Ok(var)
}

/// Fuses one pixel's measurements; absent sources pass the other through.
///
/// Returns NaN depth and variance with a `None` label when neither source is
/// present.
pub fn fuse_pixel(
    d_rgbd: Option<f64>,
    var_rgbd: Option<f64>,
    mu_sfm: Option<f64>,
    var_sfm: Option<f64>,
) -> Result<(f64, f64, Provenance)> {
    match (d_rgbd, var_rgbd, mu_sfm, var_sfm) {
        (Some(d), Some(vd), Some(mu), Some(vm)) => {
            let w1 = 1.0 / check_variance(vd)?;
            let w2 = 1.0 / check_variance(vm)?;
            let w = w1 + w2;
            Ok(((w1 * d + w2 * mu) / w, 1.0 / w, Provenance::Fused))
        }
        (Some(d), Some(vd), None, _) => Ok((d, check_variance(vd)?, Provenance::RgbdOnly)),
        (None, _, Some(mu), Some(vm)) => Ok((mu, check_variance(vm)?, Provenance::SfmOnly)),
        _ => Ok((f64::NAN, f64::NAN, Provenance::None)),
    }
}

/// Fuses a whole frame. SfM rasters must already be scale-corrected; when
/// they are absent every measured pixel is RGBD-only.
pub fn fuse_frame(
    timestamp: f64,
    rgbd: &DepthRaster,
    rgbd_var: &VarianceRaster,
    sfm: Option<&DepthRaster>,
    sfm_var: Option<&VarianceRaster>,
    scale: Option<ScaleEstimate>,
    gate: FusionGate,
) -> Result<FusedFrame> {
    rgbd.check_same_shape(rgbd_var)?;
    if let (Some(s), Some(sv)) = (sfm, sfm_var) {
        rgbd.check_same_shape(s)?;
        rgbd.check_same_shape(sv)?;
    }

    let (w, h) = rgbd.dims();
    let mut depth = DepthRaster::new_invalid(w, h);
    let mut variance = VarianceRaster::new_invalid(w, h);
    let mut provenance = ProvenanceMap::new(w, h);

    for row in 0..h {
        for col in 0..w {
            // a measurement is present only when depth and variance agree
            let (d, vd) = match (rgbd.get(col, row), rgbd_var.get(col, row)) {
                (Some(d), Some(v)) => (Some(d), Some(v)),
                _ => (None, None),
            };
            let (mu, vm) = match (
                sfm.and_then(|s| s.get(col, row)),
                sfm_var.and_then(|s| s.get(col, row)),
            ) {
                (Some(m), Some(v)) => (Some(m), Some(v)),
                _ => (None, None),
            };

            let gated_out = match (gate, d, vd, mu, vm) {
                (FusionGate::KSigma(k), Some(d), Some(vd), Some(mu), Some(vm)) => {
                    (d - mu).abs() > k * (vd + vm).sqrt()
                }
                _ => false,
            };

            let (z, v, label) = if gated_out {
                // keep the lower-variance source and label the pixel by it
                if vd.unwrap() <= vm.unwrap() {
                    fuse_pixel(d, vd, None, None)?
                } else {
                    fuse_pixel(None, None, mu, vm)?
                }
            } else {
                fuse_pixel(d, vd, mu, vm)?
            };

            if label != Provenance::None {
                depth.set(col, row, z);
                variance.set(col, row, v);
            }
            provenance.set(col, row, label);
        }
    }

    let (none, rgbd_only, sfm_only, fused) = provenance.counts();
    Ok(FusedFrame {
        depth,
        variance,
        provenance,
        scale,
        stats: FrameStats {
            timestamp,
            rgbd_only,
            sfm_only,
            fused,
            none,
        },
    })
}

/// Renders a provenance map into the conventional color coding: white for
/// RGBD-only, yellow for SfM-only, red for fused, black for no measurement.
pub fn colorize_provenance(p: &ProvenanceMap) -> image::RgbImage {
    image::RgbImage::from_fn(p.width(), p.height(), |c, r| {
        image::Rgb(match p.get(c, r) {
            Provenance::RgbdOnly => [255, 255, 255],
            Provenance::SfmOnly => [255, 255, 0],
            Provenance::Fused => [255, 0, 0],
            Provenance::None => [0, 0, 0],
        })
    })
}

/// Grayscale visualization of the fused standard deviation: sqrt(variance)
/// mapped linearly from [0, sigma_max] to [0, 255]. Invalid pixels are black.
pub fn sigma_image(var: &VarianceRaster, sigma_max: f64) -> image::GrayImage {
    image::GrayImage::from_fn(var.width(), var.height(), |c, r| {
        let level = match var.get(c, r) {
            Some(v) => ((v.sqrt() / sigma_max).clamp(0.0, 1.0) * 255.0).round() as u8,
            None => 0,
        };
        image::Luma([level])
    })
}

/// Per-frame percentage rows plus their arithmetic mean.
#[derive(Debug, Clone)]
pub struct SequenceStats {
    pub rows: Vec<FrameStats>,
    /// Mean of per-frame (rgbd_only%, sfm_only%, fused%).
    pub average: (f64, f64, f64),
    /// Mean of per-frame measured-pixel totals.
    pub average_total: f64,
}

/// Aggregates per-frame statistics into rows plus an average row.
pub fn sequence_stats(frames: &[FrameStats]) -> Result<SequenceStats> {
    if frames.is_empty() {
        return Err(Error::EmptyInput("no frame statistics to aggregate"));
    }
    let n = frames.len() as f64;
    let mut sum = (0.0, 0.0, 0.0);
    let mut total = 0.0;
    for f in frames {
        let (a, b, c) = f.percentages();
        sum.0 += a;
        sum.1 += b;
        sum.2 += c;
        total += f.total_measured() as f64;
    }
    Ok(SequenceStats {
        rows: frames.to_vec(),
        average: (sum.0 / n, sum.1 / n, sum.2 / n),
        average_total: total / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn equal_variances_average_and_halve() {
        let (z, v, label) = fuse_pixel(Some(2.0), Some(0.01), Some(3.0), Some(0.01)).unwrap();
        assert_relative_eq!(z, 2.5, max_relative = 1e-15);
        assert_relative_eq!(v, 0.005, max_relative = 1e-15);
        assert_eq!(label, Provenance::Fused);
    }

    #[test]
    fn single_source_passes_through() {
        let (z, v, label) = fuse_pixel(Some(2.0), Some(0.01), None, None).unwrap();
        assert_eq!((z, v, label), (2.0, 0.01, Provenance::RgbdOnly));

        let (z, v, label) = fuse_pixel(None, None, Some(4.5), Some(0.2)).unwrap();
        assert_eq!((z, v, label), (4.5, 0.2, Provenance::SfmOnly));
    }

    #[test]
    fn neither_source_is_labeled_none() {
        let (z, v, label) = fuse_pixel(None, None, None, None).unwrap();
        assert!(z.is_nan() && v.is_nan());
        assert_eq!(label, Provenance::None);
    }

    #[test]
    fn low_variance_rgbd_dominates() {
        let (z, v, _) = fuse_pixel(Some(2.0), Some(1e-4), Some(5.0), Some(1.0)).unwrap();
        // direct evaluation: (2.0*1.0 + 5.0*1e-4) / 1.0001
        assert_relative_eq!(z, 2.0005 / 1.0001, max_relative = 1e-14);
        assert_relative_eq!(z, 2.00029997, max_relative = 1e-8);
        assert_relative_eq!(v, 1e-4 / 1.0001, max_relative = 1e-14);
    }

    #[test]
    fn non_positive_variance_is_rejected() {
        assert!(matches!(
            fuse_pixel(Some(2.0), Some(0.0), None, None),
            Err(Error::InvalidVariance(_))
        ));
        assert!(matches!(
            fuse_pixel(Some(2.0), Some(0.01), Some(3.0), Some(-1.0)),
            Err(Error::InvalidVariance(_))
        ));
    }

    #[test]
    fn precision_weight_form_matches_direct_form() {
        let cases = [
            (2.0, 0.01, 3.0, 0.02),
            (1.0, 1e-8, 9.0, 1e3),
            (4.2, 0.5, 4.3, 0.5),
            (0.3, 1e12, 7.7, 1e-12),
        ];
        for (d, vd, mu, vm) in cases {
            let (z, v, _) = fuse_pixel(Some(d), Some(vd), Some(mu), Some(vm)).unwrap();
            let direct_z = (d * vm + mu * vd) / (vm + vd);
            let direct_v = vd * vm / (vd + vm);
            assert_relative_eq!(z, direct_z, max_relative = 1e-12);
            assert_relative_eq!(v, direct_v, max_relative = 1e-12);
        }
    }

    fn frame_with_masks() -> (DepthRaster, VarianceRaster, DepthRaster, VarianceRaster) {
        let w = 10;
        let mut rgbd = DepthRaster::new_invalid(w, 1);
        let mut rgbd_var = VarianceRaster::new_invalid(w, 1);
        let mut sfm = DepthRaster::new_invalid(w, 1);
        let mut sfm_var = VarianceRaster::new_invalid(w, 1);
        for c in 0..5 {
            rgbd.set(c, 0, 2.0);
            rgbd_var.set(c, 0, 0.01);
        }
        for c in 5..10 {
            sfm.set(c, 0, 3.0);
            sfm_var.set(c, 0, 0.02);
        }
        (rgbd, rgbd_var, sfm, sfm_var)
    }

    #[test]
    fn empty_sfm_gives_all_rgbd_only() {
        let rgbd = DepthRaster::constant(4, 4, 2.0);
        let var = VarianceRaster::constant(4, 4, 0.01);
        let frame = fuse_frame(0.0, &rgbd, &var, None, None, None, FusionGate::Off).unwrap();
        assert_eq!(frame.stats.rgbd_only, 16);
        assert_eq!(frame.stats.total_measured(), 16);
        assert_eq!(frame.stats.percentages(), (100.0, 0.0, 0.0));
    }

    #[test]
    fn disjoint_masks_split_fifty_fifty() {
        let (rgbd, rgbd_var, sfm, sfm_var) = frame_with_masks();
        let frame = fuse_frame(
            0.0,
            &rgbd,
            &rgbd_var,
            Some(&sfm),
            Some(&sfm_var),
            None,
            FusionGate::Off,
        )
        .unwrap();
        let (a, b, c) = frame.stats.percentages();
        assert_eq!((a, b, c), (50.0, 50.0, 0.0));
        assert_eq!(frame.stats.fused, 0);
    }

    #[test]
    fn depth_mask_equals_measured_provenance() {
        let (rgbd, rgbd_var, sfm, sfm_var) = frame_with_masks();
        let frame = fuse_frame(
            1.5,
            &rgbd,
            &rgbd_var,
            Some(&sfm),
            Some(&sfm_var),
            None,
            FusionGate::Off,
        )
        .unwrap();
        for r in 0..frame.depth.height() {
            for c in 0..frame.depth.width() {
                assert_eq!(
                    frame.depth.is_valid(c, r),
                    frame.provenance.get(c, r) != Provenance::None
                );
            }
        }
    }

    #[test]
    fn gate_keeps_lower_variance_source() {
        let rgbd = DepthRaster::constant(2, 1, 2.0);
        let rgbd_var = VarianceRaster::constant(2, 1, 1e-4);
        let sfm = DepthRaster::constant(2, 1, 5.0);
        let sfm_var = VarianceRaster::constant(2, 1, 1e-4);
        let frame = fuse_frame(
            0.0,
            &rgbd,
            &rgbd_var,
            Some(&sfm),
            Some(&sfm_var),
            None,
            FusionGate::KSigma(3.0),
        )
        .unwrap();
        // |2 - 5| = 3 >> 3 * sqrt(2e-4), so the gate trips
        assert_eq!(frame.provenance.get(0, 0), Provenance::RgbdOnly);
        assert_eq!(frame.depth.get(0, 0), Some(2.0));

        let off = fuse_frame(
            0.0,
            &rgbd,
            &rgbd_var,
            Some(&sfm),
            Some(&sfm_var),
            None,
            FusionGate::Off,
        )
        .unwrap();
        assert_eq!(off.provenance.get(0, 0), Provenance::Fused);
    }

    #[test]
    fn colorize_maps_labels_to_colors() {
        let mut p = ProvenanceMap::new(2, 2);
        p.set(0, 0, Provenance::RgbdOnly);
        p.set(1, 0, Provenance::SfmOnly);
        p.set(0, 1, Provenance::Fused);
        let img = colorize_provenance(&p);
        assert_eq!(img.get_pixel(0, 0).0, [255, 255, 255]);
        assert_eq!(img.get_pixel(1, 0).0, [255, 255, 0]);
        assert_eq!(img.get_pixel(0, 1).0, [255, 0, 0]);
        assert_eq!(img.get_pixel(1, 1).0, [0, 0, 0]);

        let all_none = ProvenanceMap::new(3, 3);
        let black = colorize_provenance(&all_none);
        assert!(black.pixels().all(|px| px.0 == [0, 0, 0]));
    }

    #[test]
    fn sequence_stats_single_frame_equals_itself() {
        let f = FrameStats {
            timestamp: 0.0,
            rgbd_only: 80,
            sfm_only: 10,
            fused: 10,
            none: 0,
        };
        let s = sequence_stats(&[f]).unwrap();
        assert_eq!(s.average, f.percentages());
        assert_eq!(s.rows.len(), 1);
    }

    #[test]
    fn sequence_stats_averages_percentages() {
        let a = FrameStats {
            timestamp: 0.0,
            rgbd_only: 80,
            sfm_only: 0,
            fused: 20,
            none: 0,
        };
        let b = FrameStats {
            timestamp: 1.0,
            rgbd_only: 70,
            sfm_only: 0,
            fused: 30,
            none: 0,
        };
        let s = sequence_stats(&[a, b]).unwrap();
        assert_relative_eq!(s.average.2, 25.0, max_relative = 1e-12);
    }

    #[test]
    fn sequence_stats_rejects_empty_input() {
        assert!(matches!(sequence_stats(&[]), Err(Error::EmptyInput(_))));
    }

    proptest! {
        #[test]
        fn fusion_laws(
            d in 0.1f64..10.0,
            vd in 1e-6f64..1.0,
            mu in 0.1f64..10.0,
            vm in 1e-6f64..1.0,
        ) {
            let (z, v, label) = fuse_pixel(Some(d), Some(vd), Some(mu), Some(vm)).unwrap();
            prop_assert_eq!(label, Provenance::Fused);
            // convex combination of the inputs
            prop_assert!(z >= d.min(mu) - 1e-12 && z <= d.max(mu) + 1e-12);
            // variance strictly below both inputs
            prop_assert!(v < vd && v < vm);
            // symmetric in its arguments
            let (z2, v2, _) = fuse_pixel(Some(mu), Some(vm), Some(d), Some(vd)).unwrap();
            prop_assert!((z - z2).abs() <= 1e-12 * z.abs().max(1.0));
            prop_assert!((v - v2).abs() <= 1e-12 * v.abs().max(1.0));
        }

        #[test]
        fn infinite_sfm_variance_yields_rgbd(d in 0.1f64..10.0, vd in 1e-6f64..1.0, mu in 0.1f64..10.0) {
            let (z, _, _) = fuse_pixel(Some(d), Some(vd), Some(mu), Some(1e12)).unwrap();
            prop_assert!((z - d).abs() <= 1e-9 * d.abs());
        }

        #[test]
        fn provenance_partition_covers_frame(seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
            let (w, h) = (8u32, 8u32);
            let mut rgbd = DepthRaster::new_invalid(w, h);
            let mut rgbd_var = VarianceRaster::new_invalid(w, h);
            let mut sfm = DepthRaster::new_invalid(w, h);
            let mut sfm_var = VarianceRaster::new_invalid(w, h);
            for r in 0..h {
                for c in 0..w {
                    if rng.gen_bool(0.5) {
                        rgbd.set(c, r, rng.gen_range(0.5..5.0));
                        rgbd_var.set(c, r, rng.gen_range(1e-5..1e-2));
                    }
                    if rng.gen_bool(0.5) {
                        sfm.set(c, r, rng.gen_range(0.5..5.0));
                        sfm_var.set(c, r, rng.gen_range(1e-5..1e-2));
                    }
                }
            }
            let frame = fuse_frame(0.0, &rgbd, &rgbd_var, Some(&sfm), Some(&sfm_var), None, FusionGate::Off).unwrap();
            let (n0, n1, n2, n3) = frame.provenance.counts();
            prop_assert_eq!(n0 + n1 + n2 + n3, (w * h) as usize);
            prop_assert_eq!(frame.stats.none, n0);
        }
    }
}
