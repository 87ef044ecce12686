//! Dense scalar rasters with a per-pixel validity mask.
//!
//! A [`Raster`] stores one `f64` per pixel in row-major order; invalid pixels
//! carry a NaN sentinel and are excluded from all arithmetic. Depth images
//! (meters) and variance images (square meters) share this representation.

use crate::error::{Error, Result};

/// Per-pixel depth image in meters. Invalid pixels are NaN.
pub type DepthRaster = Raster;

/// Per-pixel depth variance image in square meters. Invalid pixels are NaN.
pub type VarianceRaster = Raster;

/// Row-major grid of `f64` samples with NaN marking invalid pixels.
#[derive(Debug, Clone)]
pub struct Raster {
    width: u32,
    height: u32,
    values: Vec<f64>,
}

/// Two rasters are equal when they have the same shape, the same valid mask,
/// and identical values on that mask (invalid pixels compare equal).
impl PartialEq for Raster {
    fn eq(&self, other: &Raster) -> bool {
        self.dims() == other.dims()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| match (a.is_finite(), b.is_finite()) {
                    (true, true) => a == b,
                    (false, false) => true,
                    _ => false,
                })
    }
}

impl Raster {
    /// All-invalid raster of the given dimensions.
    pub fn new_invalid(width: u32, height: u32) -> Self {
        Raster {
            width,
            height,
            values: vec![f64::NAN; width as usize * height as usize],
        }
    }

    /// Raster filled with a constant value.
    pub fn constant(width: u32, height: u32, value: f64) -> Self {
        Raster {
            width,
            height,
            values: vec![value; width as usize * height as usize],
        }
    }

    /// Builds a raster from row-major values. Non-finite entries are invalid.
    pub fn from_values(width: u32, height: u32, values: Vec<f64>) -> Result<Self> {
        if values.len() != width as usize * height as usize {
            return Err(Error::Config(format!(
                "raster data length {} does not match {}x{}",
                values.len(),
                width,
                height
            )));
        }
        Ok(Raster {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn index(&self, col: u32, row: u32) -> usize {
        debug_assert!(col < self.width && row < self.height);
        row as usize * self.width as usize + col as usize
    }

    /// Value at (col, row), or `None` when the pixel is invalid.
    #[inline]
    pub fn get(&self, col: u32, row: u32) -> Option<f64> {
        let v = self.values[self.index(col, row)];
        v.is_finite().then_some(v)
    }

    #[inline]
    pub fn is_valid(&self, col: u32, row: u32) -> bool {
        self.values[self.index(col, row)].is_finite()
    }

    #[inline]
    pub fn set(&mut self, col: u32, row: u32, value: f64) {
        let i = self.index(col, row);
        self.values[i] = value;
    }

    #[inline]
    pub fn invalidate(&mut self, col: u32, row: u32) {
        let i = self.index(col, row);
        self.values[i] = f64::NAN;
    }

    /// Raw row-major storage; invalid pixels are NaN.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn valid_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_finite()).count()
    }

    /// Fraction of pixels carrying a valid value.
    pub fn valid_fraction(&self) -> f64 {
        if self.values.is_empty() {
            0.0
        } else {
            self.valid_count() as f64 / self.values.len() as f64
        }
    }

    /// Iterates valid pixels as (col, row, value) in row-major order.
    pub fn iter_valid(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .map(move |(i, &v)| {
                let row = (i / self.width as usize) as u32;
                let col = (i % self.width as usize) as u32;
                (col, row, v)
            })
    }

    /// True when both rasters are valid on exactly the same pixels.
    pub fn same_mask(&self, other: &Raster) -> bool {
        self.dims() == other.dims()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.is_finite() == b.is_finite())
    }

    pub(crate) fn check_same_shape(&self, other: &Raster) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::ShapeMismatch {
                width: self.width,
                height: self.height,
                got_width: other.width,
                got_height: other.height,
            });
        }
        Ok(())
    }
}
