//! Single-channel PFM rasters, the lossless float carrier.
//!
//! Header: `Pf`, then `<width> <height>`, then a scale whose sign encodes
//! endianness; this implementation writes -1.0 and accepts only negative
//! scales (little-endian). Rows are stored bottom-to-top per the format
//! convention. NaN samples encode invalid pixels. Payload floats are 32-bit,
//! so a write-then-read round trip is bit-exact for f32-representable data.

use crate::error::{Error, Result};
use crate::raster::Raster;
use std::io::Write;
use std::path::Path;

pub fn read_pfm(path: &Path) -> Result<Raster> {
    let bytes = std::fs::read(path).map_err(Error::io(path))?;
    decode(&bytes, path)
}

pub fn write_pfm(path: &Path, raster: &Raster) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path).map_err(Error::io(path))?);
    file.write_all(&encode(raster)).map_err(Error::io(path))?;
    file.flush().map_err(Error::io(path))
}

fn encode(raster: &Raster) -> Vec<u8> {
    let (w, h) = raster.dims();
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(w as usize * h as usize * 4);
    for row in (0..h).rev() {
        for col in 0..w {
            let v = match raster.get(col, row) {
                Some(v) => v as f32,
                None => f32::NAN,
            };
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn decode(bytes: &[u8], path: &Path) -> Result<Raster> {
    let fail = |msg: String| Error::format(path, msg);

    let mut pos = 0usize;
    let mut token = |what: &str| -> Result<&str> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(fail(format!("truncated header: missing {what}")));
        }
        std::str::from_utf8(&bytes[start..pos])
            .map_err(|_| fail(format!("non-ASCII bytes in header {what}")))
    };

    let magic = token("magic")?;
    if magic != "Pf" {
        if magic == "PF" {
            return Err(fail("color PFM ('PF') not supported, expected grayscale 'Pf'".into()));
        }
        return Err(fail(format!("bad magic '{magic}', expected 'Pf'")));
    }
    let width: u32 = token("width")?
        .parse()
        .map_err(|_| fail("width is not a positive integer".into()))?;
    let height: u32 = token("height")?
        .parse()
        .map_err(|_| fail("height is not a positive integer".into()))?;
    if width == 0 || height == 0 {
        return Err(fail(format!("degenerate dimensions {width}x{height}")));
    }
    let scale: f64 = token("scale")?
        .parse()
        .map_err(|_| fail("scale header is not a number".into()))?;
    if scale >= 0.0 {
        return Err(fail(format!(
            "scale {scale} declares big-endian data; only little-endian (negative scale) is supported"
        )));
    }

    // exactly one whitespace byte separates the header from the payload
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(fail("missing separator after scale header".into()));
    }
    pos += 1;

    let expected = width as usize * height as usize * 4;
    let payload = &bytes[pos..];
    if payload.len() != expected {
        return Err(fail(format!(
            "payload is {} bytes, expected {expected} for {width}x{height}",
            payload.len()
        )));
    }

    let mut raster = Raster::new_invalid(width, height);
    let mut chunk = payload.chunks_exact(4);
    for row in (0..height).rev() {
        for col in 0..width {
            let b = chunk.next().unwrap();
            let v = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
            if v.is_finite() {
                raster.set(col, row, v as f64);
            }
        }
    }
    Ok(raster)
}
