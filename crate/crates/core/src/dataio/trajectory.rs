//! Trajectory files: one camera-to-world pose per line.
//!
//! Line format: `timestamp tx ty tz qx qy qz qw` (seconds, meters, unit
//! quaternion). Lines starting with `#` are comments. Timestamps must be
//! strictly increasing; quaternions within 1e-3 of unit norm are normalized
//! on load, anything further off is rejected.

use crate::error::{Error, Result};
use crate::geometry::Pose;
use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use std::path::Path;

/// Frame timestamps must match a trajectory entry this closely (seconds);
/// poses are never interpolated.
pub const POSE_LOOKUP_TOLERANCE: f64 = 1e-4;

/// Timestamp-ordered pose sequence with tolerance-based lookup.
#[derive(Debug, Clone)]
pub struct Trajectory {
    entries: Vec<Pose>,
}

impl Trajectory {
    /// Entries must already be strictly increasing in timestamp.
    pub fn new(entries: Vec<Pose>) -> Result<Self> {
        for pair in entries.windows(2) {
            if pair[1].timestamp <= pair[0].timestamp {
                return Err(Error::Config(format!(
                    "trajectory timestamps not strictly increasing at t = {}",
                    pair[1].timestamp
                )));
            }
        }
        Ok(Trajectory { entries })
    }

    pub fn entries(&self) -> &[Pose] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Pose whose timestamp matches `ts` within [`POSE_LOOKUP_TOLERANCE`].
    pub fn pose_at(&self, ts: f64) -> Result<&Pose> {
        let i = self.entries.partition_point(|p| p.timestamp < ts);
        let candidates = [i.checked_sub(1), Some(i)];
        candidates
            .into_iter()
            .flatten()
            .filter_map(|j| self.entries.get(j))
            .find(|p| (p.timestamp - ts).abs() <= POSE_LOOKUP_TOLERANCE)
            .ok_or(Error::NoPose {
                timestamp: ts,
                tolerance: POSE_LOOKUP_TOLERANCE,
            })
    }
}

/// Reads a trajectory file; see the module docs for the line format.
pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    let mut entries = Vec::new();
    let mut last_ts: Option<f64> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 8 {
            return Err(Error::parse(
                path,
                lineno + 1,
                format!("expected 8 fields (timestamp tx ty tz qx qy qz qw), got {}", fields.len()),
            ));
        }
        let mut vals = [0.0f64; 8];
        for (i, field) in fields.iter().enumerate() {
            vals[i] = field.parse::<f64>().map_err(|_| {
                Error::parse(path, lineno + 1, format!("field {} ('{field}') is not a number", i + 1))
            })?;
        }
        let [ts, tx, ty, tz, qx, qy, qz, qw] = vals;
        if let Some(prev) = last_ts {
            if ts <= prev {
                return Err(Error::parse(
                    path,
                    lineno + 1,
                    format!("timestamp {ts} not strictly increasing (previous {prev})"),
                ));
            }
        }
        last_ts = Some(ts);

        let q = Quaternion::new(qw, qx, qy, qz);
        if (q.norm() - 1.0).abs() > 1e-3 {
            return Err(Error::parse(
                path,
                lineno + 1,
                format!("quaternion norm {} too far from 1", q.norm()),
            ));
        }
        entries.push(Pose::new(
            UnitQuaternion::from_quaternion(q),
            Vector3::new(tx, ty, tz),
            ts,
        ));
    }
    Ok(Trajectory { entries })
}

/// Writes poses in the format [`read_trajectory`] accepts.
pub fn write_trajectory(path: &Path, poses: &[Pose]) -> Result<()> {
    let mut text = String::from("# timestamp tx ty tz qx qy qz qw\n");
    for p in poses {
        let t = p.translation;
        let q = p.rotation.quaternion();
        text.push_str(&format!(
            "{:.6} {} {} {} {} {} {} {}\n",
            p.timestamp, t.x, t.y, t.z, q.i, q.j, q.k, q.w
        ));
    }
    std::fs::write(path, text).map_err(Error::io(path))
}
