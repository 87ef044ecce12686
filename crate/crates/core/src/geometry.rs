//! Rigid poses, point-cloud construction, and depth-image re-projection.
//!
//! Warping a depth+variance raster from one camera to another runs in three
//! steps: back-project every valid pixel to a point cloud, rigidly transform
//! the cloud into the target camera frame, then re-project with z-buffered
//! splatting. All loops are sequential over row-major pixel order, so results
//! are deterministic; depth collisions keep the smaller depth, ties keep the
//! candidate from the smaller source row-major index.

use crate::camera::{CameraIntrinsics, Point3};
use crate::error::{Error, Result};
use crate::raster::{DepthRaster, VarianceRaster};
use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};

/// Camera pose in the world frame (camera-to-world) with a timestamp.
///
/// `rotation * p_cam + translation` maps optical-frame points to world
/// coordinates; the stored quaternion is unit by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
    pub timestamp: f64,
}

impl Pose {
    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>, timestamp: f64) -> Self {
        Pose {
            rotation,
            translation,
            timestamp,
        }
    }

    pub fn identity(timestamp: f64) -> Self {
        Pose::new(UnitQuaternion::identity(), Vector3::zeros(), timestamp)
    }

    pub fn cam_to_world(&self, p: Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn world_to_cam(&self, p: Vector3<f64>) -> Vector3<f64> {
        self.rotation.inverse() * (p - self.translation)
    }

    /// True when rotation and translation are bit-identical (timestamps ignored).
    pub fn same_transform(&self, other: &Pose) -> bool {
        self.rotation == other.rotation && self.translation == other.translation
    }
}

/// Rigid map between two camera frames, applied as `p' = R (p - t)`.
///
/// `t` is the target camera's focal point expressed in the source frame and
/// `R` rotates source axes onto target axes.
#[derive(Debug, Clone)]
pub struct RelativePose {
    rotation: Rotation3<f64>,
    translation: Vector3<f64>,
}

impl RelativePose {
    pub fn identity() -> Self {
        RelativePose {
            rotation: Rotation3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_parts(rotation: Rotation3<f64>, translation: Vector3<f64>) -> Self {
        RelativePose {
            rotation,
            translation,
        }
    }

    /// Map from `source` camera coordinates into `target` camera coordinates,
    /// given both poses in a common world frame.
    pub fn between(source: &Pose, target: &Pose) -> Self {
        let rotation = (target.rotation.inverse() * source.rotation).to_rotation_matrix();
        let translation = source.rotation.inverse() * (target.translation - source.translation);
        RelativePose {
            rotation,
            translation,
        }
    }

    pub fn rotation(&self) -> &Rotation3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.translation
    }

    #[inline]
    pub fn apply(&self, p: Point3) -> Point3 {
        (self.rotation * (p.to_vector() - self.translation)).into()
    }

    pub fn inverse(&self) -> Self {
        RelativePose {
            rotation: self.rotation.inverse(),
            translation: -(self.rotation * self.translation),
        }
    }

    /// Exact identity check; used to keep identity warps bit-exact.
    pub fn is_identity(&self) -> bool {
        self.rotation.matrix() == &Matrix3::identity() && self.translation == Vector3::zeros()
    }

    /// d(Z')/d(Z) along the source ray direction (ax, ay) = (X/Z, Y/Z).
    #[inline]
    fn depth_gain(&self, ax: f64, ay: f64) -> f64 {
        let m = self.rotation.matrix();
        m[(2, 0)] * ax + m[(2, 1)] * ay + m[(2, 2)]
    }
}

/// One cloud sample: position in the camera frame, optional depth variance,
/// and the source pixel it came from.
#[derive(Debug, Clone, Copy)]
pub struct CloudPoint {
    pub position: Point3,
    pub variance: Option<f64>,
    pub pixel: (u32, u32),
}

/// Ordered point cloud back-projected from a depth raster.
#[derive(Debug, Clone, Default)]
pub struct PointCloud {
    pub points: Vec<CloudPoint>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// How re-projected points are splatted onto the target pixel grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterpMode {
    /// Each point lands on the nearest integer pixel.
    Nearest,
    /// Each point spreads depth-weighted contributions over its 4 neighbors.
    Bilinear,
}

impl std::str::FromStr for InterpMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nearest" => Ok(InterpMode::Nearest),
            "bilinear" => Ok(InterpMode::Bilinear),
            other => Err(Error::Config(format!(
                "unknown interpolation mode '{other}' (expected nearest|bilinear)"
            ))),
        }
    }
}

impl std::fmt::Display for InterpMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            InterpMode::Nearest => "nearest",
            InterpMode::Bilinear => "bilinear",
        })
    }
}

/// Back-projects every valid pixel of a depth raster to a 3D point cloud.
///
/// Variances, when provided, are carried through unchanged.
pub fn back_project_raster(
    intr: &CameraIntrinsics,
    depth: &DepthRaster,
    var: Option<&VarianceRaster>,
) -> Result<PointCloud> {
    if depth.dims() != (intr.width, intr.height) {
        return Err(Error::ShapeMismatch {
            width: intr.width,
            height: intr.height,
            got_width: depth.width(),
            got_height: depth.height(),
        });
    }
    if let Some(v) = var {
        depth.check_same_shape(v)?;
    }
    let mut points = Vec::with_capacity(depth.valid_count());
    for (col, row, z) in depth.iter_valid() {
        let position = intr.back_project_pixel(col as f64, row as f64, z)?;
        points.push(CloudPoint {
            position,
            variance: var.and_then(|v| v.get(col, row)),
            pixel: (col, row),
        });
    }
    Ok(PointCloud { points })
}

/// Rigidly transforms a cloud into another camera frame.
///
/// Depth variance is propagated to first order through the linear map
/// `Z' = (r31 ax + r32 ay + r33) Z - (R t)_z`, which is exact for a rigid
/// transform at a fixed source pixel and reduces to the identity for axial
/// motion. Points ending up at or behind the target focal plane are dropped;
/// the second return value counts them.
pub fn transform_cloud(cloud: &PointCloud, rel: &RelativePose) -> (PointCloud, usize) {
    let mut points = Vec::with_capacity(cloud.len());
    let mut dropped = 0usize;
    for cp in &cloud.points {
        let p = rel.apply(cp.position);
        if p.z <= 0.0 || p.z.is_nan() {
            dropped += 1;
            continue;
        }
        let variance = cp.variance.map(|v| {
            let gain = rel.depth_gain(cp.position.x / cp.position.z, cp.position.y / cp.position.z);
            gain * gain * v
        });
        points.push(CloudPoint {
            position: p,
            variance,
            pixel: cp.pixel,
        });
    }
    (PointCloud { points }, dropped)
}

/// Candidate gate for bilinear accumulation: reject contributors whose depth
/// is more than 3 sigma away from the pixel's z-buffer winner, so foreground
/// and background depths are not mixed across silhouettes.
#[inline]
fn within_occlusion_gate(depth: f64, min_depth: f64, var: f64, min_var: f64) -> bool {
    (depth - min_depth).abs() <= 3.0 * (min_var + var).sqrt()
}

/// Projects a point cloud into a camera and rasterizes depth + variance.
///
/// Collisions resolve by z-buffer (smallest depth wins); out-of-bounds
/// landings are discarded. An empty cloud yields all-invalid rasters.
pub fn reproject_to_depth(
    cloud: &PointCloud,
    intr: &CameraIntrinsics,
    mode: InterpMode,
) -> (DepthRaster, VarianceRaster) {
    match mode {
        InterpMode::Nearest => reproject_nearest(cloud, intr),
        InterpMode::Bilinear => reproject_bilinear(cloud, intr),
    }
}

fn reproject_nearest(cloud: &PointCloud, intr: &CameraIntrinsics) -> (DepthRaster, VarianceRaster) {
    let mut depth = DepthRaster::new_invalid(intr.width, intr.height);
    let mut var = VarianceRaster::new_invalid(intr.width, intr.height);
    for cp in &cloud.points {
        let Ok((cf, rf, z)) = intr.project_point(cp.position) else {
            continue;
        };
        let (c, r) = (cf.round(), rf.round());
        if !intr.in_bounds(c, r) {
            continue;
        }
        let (c, r) = (c as u32, r as u32);
        // Strictly-smaller wins; iteration order settles ties in favor of the
        // earlier (smaller row-major source index) candidate.
        if depth.get(c, r).is_none_or(|cur| z < cur) {
            depth.set(c, r, z);
            match cp.variance {
                Some(v) => var.set(c, r, v),
                None => var.invalidate(c, r),
            }
        }
    }
    (depth, var)
}

fn reproject_bilinear(cloud: &PointCloud, intr: &CameraIntrinsics) -> (DepthRaster, VarianceRaster) {
    struct Candidate {
        pixel: usize,
        weight: f64,
        depth: f64,
        variance: Option<f64>,
    }

    let (w, h) = (intr.width as usize, intr.height as usize);
    let mut candidates = Vec::with_capacity(cloud.len() * 4);
    let mut min_depth = vec![f64::INFINITY; w * h];
    let mut min_var = vec![0.0f64; w * h];
    // A pixel may only become valid as the nearest landing pixel of some
    // point; the kernel then refines its value with neighboring
    // contributions. One point therefore validates at most one pixel and
    // warping cannot fabricate measurements.
    let mut landed = vec![false; w * h];

    for cp in &cloud.points {
        let Ok((cf, rf, z)) = intr.project_point(cp.position) else {
            continue;
        };
        let (cn, rn) = (cf.round(), rf.round());
        if !intr.in_bounds(cn, rn) {
            continue;
        }
        landed[rn as usize * w + cn as usize] = true;
        let (c0, r0) = (cf.floor(), rf.floor());
        let (a, b) = (cf - c0, rf - r0);
        let neighbors = [
            (c0, r0, (1.0 - a) * (1.0 - b)),
            (c0 + 1.0, r0, a * (1.0 - b)),
            (c0, r0 + 1.0, (1.0 - a) * b),
            (c0 + 1.0, r0 + 1.0, a * b),
        ];
        for (c, r, weight) in neighbors {
            if weight <= 0.0 || !intr.in_bounds(c, r) {
                continue;
            }
            let pixel = r as usize * w + c as usize;
            // z-buffer pass, fused with candidate collection
            if z < min_depth[pixel] {
                min_depth[pixel] = z;
                min_var[pixel] = cp.variance.unwrap_or(0.0);
            }
            candidates.push(Candidate {
                pixel,
                weight,
                depth: z,
                variance: cp.variance,
            });
        }
    }

    let mut sum_w = vec![0.0f64; w * h];
    let mut sum_wz = vec![0.0f64; w * h];
    let mut sum_w2v = vec![0.0f64; w * h];
    let mut has_var = vec![true; w * h];
    for cand in &candidates {
        let i = cand.pixel;
        if !landed[i] {
            continue;
        }
        if !within_occlusion_gate(cand.depth, min_depth[i], cand.variance.unwrap_or(0.0), min_var[i])
        {
            continue;
        }
        sum_w[i] += cand.weight;
        sum_wz[i] += cand.weight * cand.depth;
        match cand.variance {
            Some(v) => sum_w2v[i] += cand.weight * cand.weight * v,
            None => has_var[i] = false,
        }
    }

    let mut depth = DepthRaster::new_invalid(intr.width, intr.height);
    let mut var = VarianceRaster::new_invalid(intr.width, intr.height);
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            if landed[i] && sum_w[i] > 0.0 {
                depth.set(c as u32, r as u32, sum_wz[i] / sum_w[i]);
                if has_var[i] {
                    var.set(c as u32, r as u32, sum_w2v[i] / (sum_w[i] * sum_w[i]));
                }
            }
        }
    }
    (depth, var)
}

/// Warps a depth+variance raster into another camera pose.
///
/// Composition of [`back_project_raster`], [`transform_cloud`], and
/// [`reproject_to_depth`]. An identity relative pose reproduces the input
/// bit-exactly without touching the interpolation path.
pub fn warp_depth(
    intr: &CameraIntrinsics,
    depth: &DepthRaster,
    var: &VarianceRaster,
    rel: &RelativePose,
    mode: InterpMode,
) -> Result<(DepthRaster, VarianceRaster)> {
    if rel.is_identity() {
        return Ok((depth.clone(), var.clone()));
    }
    let cloud = back_project_raster(intr, depth, Some(var))?;
    let (moved, dropped) = transform_cloud(&cloud, rel);
    if dropped > 0 {
        log::debug!("warp_depth: {dropped} points fell behind the target camera");
    }
    Ok(reproject_to_depth(&moved, intr, mode))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::CameraIntrinsics;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn intr() -> CameraIntrinsics {
        CameraIntrinsics::new(525.0, 525.0, 319.5, 239.5, 640, 480).unwrap()
    }

    fn small_intr() -> CameraIntrinsics {
        CameraIntrinsics::new(10.0, 10.0, 1.0, 1.0, 4, 4).unwrap()
    }

    fn random_pose(rng: &mut impl Rng, max_angle: f64, max_shift: f64) -> RelativePose {
        let axis = Vector3::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
        let angle = (rng.gen::<f64>() - 0.5) * 2.0 * max_angle;
        let rotation = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
        let translation = Vector3::new(
            (rng.gen::<f64>() - 0.5) * 2.0 * max_shift,
            (rng.gen::<f64>() - 0.5) * 2.0 * max_shift,
            (rng.gen::<f64>() - 0.5) * 2.0 * max_shift,
        );
        RelativePose::from_parts(rotation, translation)
    }

    #[test]
    fn single_valid_pixel_yields_single_point() {
        let intr = CameraIntrinsics::new(100.0, 100.0, 1.0, 1.0, 2, 2).unwrap();
        let mut depth = DepthRaster::new_invalid(2, 2);
        depth.set(1, 1, 2.0); // principal point
        let cloud = back_project_raster(&intr, &depth, None).unwrap();
        assert_eq!(cloud.len(), 1);
        assert_eq!(cloud.points[0].position, Point3::new(0.0, 0.0, 2.0));
        assert_eq!(cloud.points[0].pixel, (1, 1));
    }

    #[test]
    fn all_invalid_raster_yields_empty_cloud() {
        let depth = DepthRaster::new_invalid(640, 480);
        let cloud = back_project_raster(&intr(), &depth, None).unwrap();
        assert!(cloud.is_empty());
    }

    #[test]
    fn full_raster_matches_per_pixel_oracle() {
        let intr = intr();
        let depth = DepthRaster::constant(640, 480, 3.25);
        let cloud = back_project_raster(&intr, &depth, None).unwrap();
        assert_eq!(cloud.len(), 640 * 480);
        for cp in &cloud.points {
            let (c, r) = cp.pixel;
            let expect = intr.back_project_pixel(c as f64, r as f64, 3.25).unwrap();
            assert_eq!(cp.position, expect);
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let depth = DepthRaster::new_invalid(320, 240);
        assert!(matches!(
            back_project_raster(&intr(), &depth, None),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn identity_transform_leaves_cloud_unchanged() {
        let depth = DepthRaster::constant(4, 4, 2.0);
        let cloud = back_project_raster(&small_intr(), &depth, None).unwrap();
        let (moved, dropped) = transform_cloud(&cloud, &RelativePose::identity());
        assert_eq!(dropped, 0);
        for (a, b) in cloud.points.iter().zip(&moved.points) {
            assert_eq!(a.position, b.position);
        }
    }

    #[test]
    fn pure_axial_translation_shifts_depth() {
        let cloud = PointCloud {
            points: vec![CloudPoint {
                position: Point3::new(0.0, 0.0, 3.0),
                variance: Some(0.01),
                pixel: (0, 0),
            }],
        };
        let rel = RelativePose::from_parts(Rotation3::identity(), Vector3::new(0.0, 0.0, 1.0));
        let (moved, _) = transform_cloud(&cloud, &rel);
        assert_eq!(moved.points[0].position, Point3::new(0.0, 0.0, 2.0));
        // axial motion leaves depth variance untouched
        assert_eq!(moved.points[0].variance, Some(0.01));
    }

    #[test]
    fn transform_round_trip_recovers_cloud() {
        let mut rng = StdRng::seed_from_u64(11);
        let depth = DepthRaster::constant(4, 4, 2.5);
        let cloud = back_project_raster(&small_intr(), &depth, None).unwrap();
        for _ in 0..20 {
            let rel = random_pose(&mut rng, 0.5, 0.5);
            let (fwd, _) = transform_cloud(&cloud, &rel);
            let (back, _) = transform_cloud(&fwd, &rel.inverse());
            for (a, b) in cloud.points.iter().zip(&back.points) {
                assert_relative_eq!(a.position.x, b.position.x, epsilon = 1e-9);
                assert_relative_eq!(a.position.y, b.position.y, epsilon = 1e-9);
                assert_relative_eq!(a.position.z, b.position.z, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn behind_camera_points_are_dropped_and_counted() {
        let cloud = PointCloud {
            points: vec![
                CloudPoint {
                    position: Point3::new(0.0, 0.0, 0.5),
                    variance: None,
                    pixel: (0, 0),
                },
                CloudPoint {
                    position: Point3::new(0.0, 0.0, 3.0),
                    variance: None,
                    pixel: (1, 0),
                },
            ],
        };
        let rel = RelativePose::from_parts(Rotation3::identity(), Vector3::new(0.0, 0.0, 1.0));
        let (moved, dropped) = transform_cloud(&cloud, &rel);
        assert_eq!(moved.len(), 1);
        assert_eq!(dropped, 1);
    }

    #[test]
    fn identity_reprojection_reproduces_raster_nearest() {
        let intr = intr();
        let mut depth = DepthRaster::new_invalid(640, 480);
        for r in (0..480).step_by(7) {
            for c in (0..640).step_by(5) {
                depth.set(c, r, 1.0 + (c + r) as f64 * 1e-3);
            }
        }
        let cloud = back_project_raster(&intr, &depth, None).unwrap();
        let (out, _) = reproject_to_depth(&cloud, &intr, InterpMode::Nearest);
        assert_eq!(out, depth);
    }

    #[test]
    fn z_buffer_keeps_nearest_depth() {
        let intr = small_intr();
        let mk = |z| {
            // both points project to pixel (1, 1), the principal point
            CloudPoint {
                position: Point3::new(0.0, 0.0, z),
                variance: None,
                pixel: (0, 0),
            }
        };
        let cloud = PointCloud {
            points: vec![mk(2.0), mk(1.5)],
        };
        let (out, _) = reproject_to_depth(&cloud, &intr, InterpMode::Nearest);
        assert_eq!(out.get(1, 1), Some(1.5));
    }

    #[test]
    fn warp_identity_is_bit_exact() {
        let mut depth = DepthRaster::new_invalid(4, 4);
        let mut var = VarianceRaster::new_invalid(4, 4);
        depth.set(2, 1, 1.234567890123);
        var.set(2, 1, 0.0321);
        let (d, v) = warp_depth(
            &small_intr(),
            &depth,
            &var,
            &RelativePose::identity(),
            InterpMode::Bilinear,
        )
        .unwrap();
        assert_eq!(d, depth);
        assert_eq!(v, var);
    }

    #[test]
    fn axial_translation_adds_to_depth() {
        let intr = intr();
        let depth = DepthRaster::constant(640, 480, 3.0);
        let var = VarianceRaster::constant(640, 480, 1e-4);
        let rel = RelativePose::from_parts(Rotation3::identity(), Vector3::new(0.0, 0.0, -1.0));
        let (d, v) = warp_depth(&intr, &depth, &var, &rel, InterpMode::Nearest).unwrap();
        let mut checked = 0usize;
        for (_, _, z) in d.iter_valid() {
            assert_relative_eq!(z, 4.0, epsilon = 1e-12);
            checked += 1;
        }
        // a fronto-parallel plane backing away keeps most of the image covered
        assert!(checked as f64 > 0.5 * (640.0 * 480.0));
        for (_, _, x) in v.iter_valid() {
            assert_relative_eq!(x, 1e-4, epsilon = 1e-18);
        }
    }

    #[test]
    fn mask_soundness_no_output_without_candidates() {
        let mut rng = StdRng::seed_from_u64(3);
        let intr = small_intr();
        for _ in 0..50 {
            let n = rng.gen_range(0..6);
            let points = (0..n)
                .map(|i| CloudPoint {
                    position: Point3::new(
                        rng.gen_range(-0.3..0.3),
                        rng.gen_range(-0.3..0.3),
                        rng.gen_range(0.5..3.0),
                    ),
                    variance: Some(rng.gen_range(1e-6..1e-2)),
                    pixel: (i as u32, 0),
                })
                .collect();
            let cloud = PointCloud { points };
            for mode in [InterpMode::Nearest, InterpMode::Bilinear] {
                let (d, _) = reproject_to_depth(&cloud, &intr, mode);
                assert!(d.valid_count() <= cloud.len() * 4);
                if cloud.is_empty() {
                    assert_eq!(d.valid_count(), 0);
                }
            }
        }
    }

    #[test]
    fn unknown_mode_string_is_a_config_error() {
        let err = "cubic".parse::<InterpMode>().unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    proptest! {
        // z-buffer output at any pixel equals the minimum of the candidate
        // depths splatted there (nearest mode: one candidate per point).
        #[test]
        fn z_buffer_is_pixelwise_minimum(zs in proptest::collection::vec(0.5f64..5.0, 1..20)) {
            let intr = small_intr();
            let points = zs.iter().enumerate().map(|(i, &z)| CloudPoint {
                position: Point3::new(0.0, 0.0, z),
                variance: None,
                pixel: (i as u32 % 4, i as u32 / 4 % 4),
            }).collect();
            let cloud = PointCloud { points };
            let (out, _) = reproject_to_depth(&cloud, &intr, InterpMode::Nearest);
            let min = zs.iter().cloned().fold(f64::INFINITY, f64::min);
            prop_assert_eq!(out.get(1, 1), Some(min));
        }
    }
}
