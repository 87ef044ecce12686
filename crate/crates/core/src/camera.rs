//! Pinhole camera model with optional radial-tangential lens distortion.
//!
//! Back-projection maps a pixel plus depth into the camera's optical frame
//! (z along the optical axis, x right, y down); projection is its inverse.
//! Integer pixel (c, r) addresses the sample point at exactly (c, r) in
//! continuous coordinates - there is no half-pixel offset.

use crate::error::{Error, Result};
use nalgebra::Vector3;

/// 3D point in the standard optical frame, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }
}

impl From<Vector3<f64>> for Point3 {
    fn from(v: Vector3<f64>) -> Self {
        Point3::new(v.x, v.y, v.z)
    }
}

impl From<Point3> for Vector3<f64> {
    fn from(p: Point3) -> Self {
        p.to_vector()
    }
}

/// Brown-Conrady radial-tangential distortion coefficients.
///
/// All-zero coefficients give the plain pinhole model and both conversions
/// below become exact identities on the normalized coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Distortion {
    pub k1: f64,
    pub k2: f64,
    pub p1: f64,
    pub p2: f64,
}

impl Distortion {
    pub fn new(k1: f64, k2: f64, p1: f64, p2: f64) -> Self {
        Distortion { k1, k2, p1, p2 }
    }

    pub fn is_zero(&self) -> bool {
        self.k1 == 0.0 && self.k2 == 0.0 && self.p1 == 0.0 && self.p2 == 0.0
    }

    /// Applies distortion to normalized coordinates (x, y) = (X/Z, Y/Z).
    pub fn distort(&self, x: f64, y: f64) -> (f64, f64) {
        if self.is_zero() {
            return (x, y);
        }
        let r2 = x * x + y * y;
        let radial = 1.0 + self.k1 * r2 + self.k2 * r2 * r2;
        let xy = x * y;
        let dx = 2.0 * self.p1 * xy + self.p2 * (r2 + 2.0 * x * x);
        let dy = self.p1 * (r2 + 2.0 * y * y) + 2.0 * self.p2 * xy;
        (radial * x + dx, radial * y + dy)
    }

    /// Inverts [`Distortion::distort`] by Newton iteration on the 2x2 system.
    ///
    /// Converges to well below 1e-6 px for calibration-magnitude coefficients.
    pub fn undistort(&self, xd: f64, yd: f64) -> (f64, f64) {
        if self.is_zero() {
            return (xd, yd);
        }
        let (mut x, mut y) = (xd, yd);
        for _ in 0..25 {
            let r2 = x * x + y * y;
            let radial = 1.0 + self.k1 * r2 + self.k2 * r2 * r2;
            let xy = x * y;
            let fx = radial * x + 2.0 * self.p1 * xy + self.p2 * (r2 + 2.0 * x * x) - xd;
            let fy = radial * y + self.p1 * (r2 + 2.0 * y * y) + 2.0 * self.p2 * xy - yd;
            if fx.abs() < 1e-14 && fy.abs() < 1e-14 {
                break;
            }
            let dr_dr2 = self.k1 + 2.0 * self.k2 * r2;
            let j11 = radial + 2.0 * x * x * dr_dr2 + 2.0 * self.p1 * y + 6.0 * self.p2 * x;
            let j12 = 2.0 * xy * dr_dr2 + 2.0 * self.p1 * x + 2.0 * self.p2 * y;
            let j21 = 2.0 * xy * dr_dr2 + 2.0 * self.p1 * x + 2.0 * self.p2 * y;
            let j22 = radial + 2.0 * y * y * dr_dr2 + 6.0 * self.p1 * y + 2.0 * self.p2 * x;
            let det = j11 * j22 - j12 * j21;
            if det.abs() < 1e-300 {
                break;
            }
            x -= (j22 * fx - j12 * fy) / det;
            y -= (j11 * fy - j21 * fx) / det;
        }
        (x, y)
    }
}

/// Pinhole intrinsic parameters in pixels plus lens distortion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub distortion: Distortion,
}

impl CameraIntrinsics {
    /// Validated constructor with zero distortion.
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        let intr = CameraIntrinsics {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            distortion: Distortion::default(),
        };
        intr.validate()?;
        Ok(intr)
    }

    pub fn with_distortion(mut self, distortion: Distortion) -> Self {
        self.distortion = distortion;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidIntrinsics(msg));
        if !(self.fx > 0.0 && self.fx.is_finite()) || !(self.fy > 0.0 && self.fy.is_finite()) {
            return fail(format!("fx, fy must be positive, got ({}, {})", self.fx, self.fy));
        }
        if self.width < 1 || self.height < 1 {
            return fail(format!(
                "width, height must be at least 1, got ({}, {})",
                self.width, self.height
            ));
        }
        if !(self.cx > 0.0 && self.cx < self.width as f64) {
            return fail(format!("cx = {} not inside (0, {})", self.cx, self.width));
        }
        if !(self.cy > 0.0 && self.cy < self.height as f64) {
            return fail(format!("cy = {} not inside (0, {})", self.cy, self.height));
        }
        Ok(())
    }

    /// True when (col, row) addresses a sample point of this image grid.
    pub fn in_bounds(&self, col: f64, row: f64) -> bool {
        col >= 0.0 && col <= (self.width - 1) as f64 && row >= 0.0 && row <= (self.height - 1) as f64
    }

    /// Undistorted normalized ray direction (X/Z, Y/Z) for a pixel.
    pub fn pixel_ray(&self, col: f64, row: f64) -> (f64, f64) {
        self.distortion
            .undistort((col - self.cx) / self.fx, (row - self.cy) / self.fy)
    }

    /// Recovers the 3D point observed at (col, row) with the given depth.
    ///
    /// The depth is taken as the Z coordinate; X and Y follow from the
    /// inverted pinhole equations on the undistorted pixel.
    pub fn back_project_pixel(&self, col: f64, row: f64, depth: f64) -> Result<Point3> {
        if !(depth > 0.0 && depth.is_finite()) {
            return Err(Error::InvalidDepth(depth));
        }
        if !self.in_bounds(col, row) {
            return Err(Error::OutOfBounds {
                col,
                row,
                width: self.width,
                height: self.height,
            });
        }
        let (xn, yn) = self.pixel_ray(col, row);
        Ok(Point3::new(xn * depth, yn * depth, depth))
    }

    /// Projects a 3D optical-frame point to (col, row, depth).
    ///
    /// The returned coordinates may fall outside image bounds; clipping is the
    /// caller's decision.
    pub fn project_point(&self, p: Point3) -> Result<(f64, f64, f64)> {
        if p.z > 0.0 {
            let (xd, yd) = self.distortion.distort(p.x / p.z, p.y / p.z);
            Ok((self.fx * xd + self.cx, self.fy * yd + self.cy, p.z))
        } else {
            Err(Error::BehindCamera { z: p.z })
        }
    }
}
