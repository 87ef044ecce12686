//! Shared fixtures for the pipeline-stage benchmarks.

use depthfuse_core::geometry::Pose;
use depthfuse_core::sim::{self, Scene, SimConfig};
use depthfuse_core::{CameraIntrinsics, DepthRaster, VarianceRaster};

pub fn bench_intrinsics() -> CameraIntrinsics {
    CameraIntrinsics::new(525.0, 525.0, 319.5, 239.5, 640, 480).unwrap()
}

/// Rendered room with RGBD-style depth + variance and a semi-dense SfM pair.
pub struct BenchFrame {
    pub intr: CameraIntrinsics,
    pub rgbd: DepthRaster,
    pub rgbd_var: VarianceRaster,
    pub sfm: DepthRaster,
    pub sfm_var: VarianceRaster,
}

pub fn bench_frame() -> BenchFrame {
    let intr = bench_intrinsics();
    let cfg = SimConfig::default();
    let view = sim::render(&Scene::demo_room(), &intr, &Pose::identity(0.0));
    let rgbd = sim::degrade_rgbd(&view.depth, &view.albedo, &cfg, 0);
    let rgbd_var = depthfuse_core::RgbdNoiseModel::default().variance_raster(&rgbd);
    let (sfm, sfm_var) = sim::degrade_sfm(&view.depth, &view.texture, &cfg, 0);
    BenchFrame {
        intr,
        rgbd,
        rgbd_var,
        sfm,
        sfm_var,
    }
}
