//! Depth fusion of structured-light RGBD images with semi-dense SfM depth.
//!
//! Structured-light sensors lose depth on distant, dark, specular, or sunlit
//! surfaces; monocular SfM estimates depth exactly where images carry
//! gradient, but only up to an unknown, drifting scale. This crate merges the
//! two streams into fused depth images with per-pixel variance and
//! provenance:
//!
//! * [`camera`] - pinhole projection and back-projection,
//! * [`geometry`] - poses, point clouds, depth-image warping,
//! * [`noise`] - the quadratic RGBD depth-noise model,
//! * [`registration`] - keyframe selection and SfM co-registration,
//! * [`scale`] - least-squares SfM scale estimation with drift tracking,
//! * [`fusion`] - per-pixel Gaussian posterior fusion and statistics,
//! * [`sim`] - a synthetic-scene oracle for verification,
//! * [`dataio`] - the on-disk dataset formats,
//! * [`pipeline`] - the end-to-end driver used by the CLI.

pub mod camera;
pub mod dataio;
pub mod error;
pub mod fusion;
pub mod geometry;
pub mod noise;
pub mod pipeline;
pub mod raster;
pub mod registration;
pub mod scale;
pub mod sim;
#[doc(hidden)]
pub mod test_support;

pub use camera::{CameraIntrinsics, Distortion, Point3};
pub use error::{Error, Result};
pub use fusion::{FrameStats, FusedFrame, FusionGate, Provenance, ProvenanceMap, SequenceStats};
pub use geometry::{CloudPoint, InterpMode, PointCloud, Pose, RelativePose};
pub use noise::RgbdNoiseModel;
pub use pipeline::{FuseReport, PipelineConfig};
pub use raster::{DepthRaster, Raster, VarianceRaster};
pub use registration::{Keyframe, TrackedFrame};
pub use scale::{ScaleEstimate, ScaleMode};
pub use sim::{Scene, SimConfig};
