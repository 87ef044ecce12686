//! Co-registration of keyframe SfM depth with RGBD frames.
//!
//! SfM depth exists only for keyframes. For every other frame, the governing
//! keyframe is the closest earlier one in time, and its depth+variance raster
//! is warped into the frame's camera through the relative pose. A frame that
//! is itself a keyframe registers "automatically": the keyframe rasters are
//! returned unchanged, with no interpolation involved.

use crate::camera::CameraIntrinsics;
use crate::error::{Error, Result};
use crate::geometry::{warp_depth, InterpMode, Pose, RelativePose};
use crate::raster::{DepthRaster, VarianceRaster};

/// One SfM keyframe: semi-dense depth and variance in the SfM system's
/// internal scale, plus the keyframe camera pose.
#[derive(Debug, Clone)]
pub struct Keyframe {
    pub id: u32,
    pub timestamp: f64,
    pub pose: Pose,
    pub sfm_depth: DepthRaster,
    pub sfm_variance: VarianceRaster,
}

impl Keyframe {
    /// Validates that depth and variance agree in shape and valid mask.
    pub fn new(
        id: u32,
        timestamp: f64,
        pose: Pose,
        sfm_depth: DepthRaster,
        sfm_variance: VarianceRaster,
    ) -> Result<Self> {
        sfm_depth.check_same_shape(&sfm_variance)?;
        if !sfm_depth.same_mask(&sfm_variance) {
            return Err(Error::Config(format!(
                "keyframe {id}: depth and variance valid masks differ"
            )));
        }
        Ok(Keyframe {
            id,
            timestamp,
            pose,
            sfm_depth,
            sfm_variance,
        })
    }

    /// Fraction of pixels with an SfM estimate; semi-dense maps sit well
    /// below 1. Recorded as a statistic, not enforced.
    pub fn density(&self) -> f64 {
        self.sfm_depth.valid_fraction()
    }
}

/// One RGBD frame tracked against a keyframe.
#[derive(Debug, Clone)]
pub struct TrackedFrame {
    pub timestamp: f64,
    pub pose: Pose,
    pub rgbd_depth: DepthRaster,
    /// Governing keyframe, absent for frames before the first keyframe.
    pub keyframe_id: Option<u32>,
}

/// Picks the governing keyframe: greatest timestamp at or before `frame_ts`.
///
/// `keyframes` must be sorted by ascending timestamp.
pub fn select_keyframe(frame_ts: f64, keyframes: &[Keyframe]) -> Result<&Keyframe> {
    keyframes
        .iter()
        .take_while(|kf| kf.timestamp <= frame_ts)
        .last()
        .ok_or(Error::NoKeyframe { frame_ts })
}

/// Warps the keyframe's SfM depth+variance into the frame's camera.
///
/// Returns rasters still in SfM scale; scale correction happens afterwards.
/// When the frame's pose equals the keyframe's, the keyframe rasters are
/// returned bit-exactly.
pub fn register_sfm_depth(
    kf: &Keyframe,
    frame: &TrackedFrame,
    intr: &CameraIntrinsics,
    mode: InterpMode,
) -> Result<(DepthRaster, VarianceRaster)> {
    debug_assert_eq!(frame.keyframe_id, Some(kf.id));
    if frame.pose.same_transform(&kf.pose) {
        return Ok((kf.sfm_depth.clone(), kf.sfm_variance.clone()));
    }
    let rel = RelativePose::between(&kf.pose, &frame.pose);
    warp_depth(intr, &kf.sfm_depth, &kf.sfm_variance, &rel, mode)
}
