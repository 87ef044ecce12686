//! Bit-exact file formats and the on-disk dataset layout.
//!
//! A dataset root contains:
//!
//! ```text
//! intrinsics.txt            key-value pinhole parameters
//! trajectory.txt            timestamp tx ty tz qx qy qz qw  (camera-to-world)
//! depth/<ts>.png            RGBD depth, 16-bit grayscale millimeters, 0 = invalid
//! keyframes/<ts>.depth.pfm  SfM keyframe depth (SfM scale)
//! keyframes/<ts>.var.pfm    SfM keyframe variance (SfM scale squared)
//! truth/<ts>.pfm            optional ground-truth depth for scoring
//! fused/                    pipeline outputs
//! ```
//!
//! Timestamps in filenames are zero-padded fixed-point with six decimal
//! places so listings sort temporally. PFM files are standard single-channel
//! little-endian 32-bit float rasters (scale header -1.0) with NaN marking
//! invalid pixels; they carry everything millimeter quantization would
//! destroy.

mod depth_png;
mod pfm;
mod stats;
mod text;
mod trajectory;

pub use depth_png::{read_depth_png, write_depth_png};
pub use pfm::{read_pfm, write_pfm};
pub use stats::{read_stats_csv, write_stats_csv, StatsRow};
pub use text::{read_intrinsics, read_kv_file, write_intrinsics};
pub use trajectory::{read_trajectory, write_trajectory, Trajectory, POSE_LOOKUP_TOLERANCE};

use crate::camera::CameraIntrinsics;
use crate::error::{Error, Result};
use std::path::{Path, PathBuf};

/// Fixed-point timestamp used in filenames; zero-padded so lexicographic
/// order equals temporal order.
pub fn format_timestamp(ts: f64) -> String {
    format!("{ts:017.6}")
}

fn parse_filename_timestamp(path: &Path, stem: &str) -> Result<f64> {
    stem.parse::<f64>()
        .map_err(|_| Error::format(path, format!("filename stem '{stem}' is not a timestamp")))
}

/// One RGBD frame on disk.
#[derive(Debug, Clone)]
pub struct FrameEntry {
    pub timestamp: f64,
    pub depth_path: PathBuf,
    pub truth_path: Option<PathBuf>,
}

/// One SfM keyframe on disk.
#[derive(Debug, Clone)]
pub struct KeyframeEntry {
    pub id: u32,
    pub timestamp: f64,
    pub depth_path: PathBuf,
    pub var_path: PathBuf,
}

/// Validated view of a dataset directory; rasters are loaded lazily.
#[derive(Debug)]
pub struct Dataset {
    pub root: PathBuf,
    pub intrinsics: CameraIntrinsics,
    pub trajectory: Trajectory,
    /// RGBD frames sorted by timestamp.
    pub frames: Vec<FrameEntry>,
    /// Keyframes sorted by timestamp; ids follow that order.
    pub keyframes: Vec<KeyframeEntry>,
}

impl Dataset {
    /// Opens and validates a dataset root: intrinsics and trajectory must
    /// parse, and every frame and keyframe timestamp must have a pose.
    pub fn open(root: &Path) -> Result<Dataset> {
        let intrinsics = read_intrinsics(&root.join("intrinsics.txt"))?;
        let trajectory = read_trajectory(&root.join("trajectory.txt"))?;

        let mut frames = Vec::new();
        let depth_dir = root.join("depth");
        for (ts, path) in scan_timestamped(&depth_dir, ".png")? {
            let truth = root.join("truth").join(format!("{}.pfm", format_timestamp(ts)));
            frames.push(FrameEntry {
                timestamp: ts,
                depth_path: path,
                truth_path: truth.exists().then_some(truth),
            });
        }
        if frames.is_empty() {
            return Err(Error::Dataset {
                root: root.to_path_buf(),
                msg: format!("no depth frames found under {}", depth_dir.display()),
            });
        }

        let mut keyframes = Vec::new();
        let kf_dir = root.join("keyframes");
        if kf_dir.is_dir() {
            for (id, (ts, depth_path)) in scan_timestamped(&kf_dir, ".depth.pfm")?
                .into_iter()
                .enumerate()
            {
                let var_path = kf_dir.join(format!("{}.var.pfm", format_timestamp(ts)));
                if !var_path.exists() {
                    return Err(Error::Dataset {
                        root: root.to_path_buf(),
                        msg: format!("keyframe variance file missing: {}", var_path.display()),
                    });
                }
                keyframes.push(KeyframeEntry {
                    id: id as u32,
                    timestamp: ts,
                    depth_path,
                    var_path,
                });
            }
        }

        // every frame and keyframe must appear in the trajectory
        for (what, ts) in frames
            .iter()
            .map(|f| ("frame", f.timestamp))
            .chain(keyframes.iter().map(|k| ("keyframe", k.timestamp)))
        {
            if trajectory.pose_at(ts).is_err() {
                return Err(Error::Dataset {
                    root: root.to_path_buf(),
                    msg: format!("{what} at t = {ts} has no pose in trajectory.txt"),
                });
            }
        }

        Ok(Dataset {
            root: root.to_path_buf(),
            intrinsics,
            trajectory,
            frames,
            keyframes,
        })
    }
}

/// Files `<timestamp><suffix>` in a directory, sorted by timestamp.
fn scan_timestamped(dir: &Path, suffix: &str) -> Result<Vec<(f64, PathBuf)>> {
    let mut out = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(Error::io(dir))?;
    for entry in entries {
        let entry = entry.map_err(Error::io(dir))?;
        let path = entry.path();
        let name = entry.file_name();
        let name = name.to_string_lossy();
        if let Some(stem) = name.strip_suffix(suffix) {
            out.push((parse_filename_timestamp(&path, stem)?, path));
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}
