//! RGBD depth as 16-bit grayscale PNG, millimeters.
//!
//! Stored value = round(depth * 1000); 0 marks an invalid pixel. Depths
//! above 65.535 m do not fit the encoding and are written as invalid -
//! documented saturation, acceptable for structured-light sensors whose
//! range ends far below that.

use crate::error::{Error, Result};
use crate::raster::DepthRaster;
use image::{DynamicImage, ImageBuffer, Luma};
use std::path::Path;

pub fn read_depth_png(path: &Path) -> Result<DepthRaster> {
    let img = image::open(path).map_err(|source| Error::Image {
        file: path.to_path_buf(),
        source,
    })?;
    let gray16 = match img {
        DynamicImage::ImageLuma16(buf) => buf,
        other => {
            return Err(Error::format(
                path,
                format!(
                    "expected 16-bit single-channel depth PNG, got {:?}",
                    other.color()
                ),
            ))
        }
    };
    let (w, h) = gray16.dimensions();
    let mut depth = DepthRaster::new_invalid(w, h);
    for (col, row, Luma([mm])) in gray16.enumerate_pixels() {
        if *mm > 0 {
            depth.set(col, row, *mm as f64 / 1000.0);
        }
    }
    Ok(depth)
}

pub fn write_depth_png(path: &Path, depth: &DepthRaster) -> Result<()> {
    let buf = ImageBuffer::<Luma<u16>, Vec<u16>>::from_fn(depth.width(), depth.height(), |c, r| {
        let mm = match depth.get(c, r) {
            Some(z) if z > 0.0 => {
                let mm = (z * 1000.0).round();
                if mm >= 1.0 && mm <= u16::MAX as f64 {
                    mm as u16
                } else {
                    0
                }
            }
            _ => 0,
        };
        Luma([mm])
    });
    buf.save(path).map_err(|source| Error::Image {
        file: path.to_path_buf(),
        source,
    })
}
