//! Line-oriented `key value` files: camera intrinsics and pipeline configs.

use crate::camera::{CameraIntrinsics, Distortion};
use crate::error::{Error, Result};
use std::path::Path;

/// Parses a `key value` file. Blank lines and `#` comments are ignored;
/// duplicate keys are an error rather than last-write-wins.
pub fn read_kv_file(path: &Path) -> Result<Vec<(String, String, usize)>> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    let mut pairs: Vec<(String, String, usize)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let key = it.next().unwrap().to_string();
        let value = match it.next() {
            Some(v) => v.to_string(),
            None => return Err(Error::parse(path, lineno + 1, format!("key '{key}' has no value"))),
        };
        if let Some(extra) = it.next() {
            return Err(Error::parse(
                path,
                lineno + 1,
                format!("unexpected trailing token '{extra}' after '{key} {value}'"),
            ));
        }
        if pairs.iter().any(|(k, _, _)| *k == key) {
            return Err(Error::parse(path, lineno + 1, format!("duplicate key '{key}'")));
        }
        pairs.push((key, value, lineno + 1));
    }
    Ok(pairs)
}

fn numeric(path: &Path, key: &str, value: &str, line: usize) -> Result<f64> {
    value.parse::<f64>().map_err(|_| {
        Error::parse(path, line, format!("key '{key}' has non-numeric value '{value}'"))
    })
}

/// Reads camera intrinsics from a key-value file.
///
/// Required keys: fx fy cx cy width height. Distortion keys k1 k2 p1 p2
/// default to zero when missing. Invariant violations are parse errors.
pub fn read_intrinsics(path: &Path) -> Result<CameraIntrinsics> {
    let pairs = read_kv_file(path)?;
    let lookup = |key: &str| pairs.iter().find(|(k, _, _)| k == key);

    let mut required = [0.0f64; 6];
    for (i, key) in ["fx", "fy", "cx", "cy", "width", "height"].iter().enumerate() {
        let Some((_, value, line)) = lookup(key) else {
            return Err(Error::format(path, format!("missing required key '{key}'")));
        };
        required[i] = numeric(path, key, value, *line)?;
    }
    let [fx, fy, cx, cy, width, height] = required;
    for (key, v) in [("width", width), ("height", height)] {
        if v.fract() != 0.0 || v < 0.0 {
            return Err(Error::format(
                path,
                format!("key '{key}' must be a non-negative integer, got {v}"),
            ));
        }
    }

    let mut distortion = [0.0f64; 4];
    for (i, key) in ["k1", "k2", "p1", "p2"].iter().enumerate() {
        if let Some((_, value, line)) = lookup(key) {
            distortion[i] = numeric(path, key, value, *line)?;
        }
    }

    for (key, _, _) in &pairs {
        if !matches!(
            key.as_str(),
            "fx" | "fy" | "cx" | "cy" | "width" | "height" | "k1" | "k2" | "p1" | "p2"
        ) {
            return Err(Error::format(path, format!("unknown key '{key}'")));
        }
    }

    let intr = CameraIntrinsics::new(fx, fy, cx, cy, width as u32, height as u32)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let [k1, k2, p1, p2] = distortion;
    Ok(intr.with_distortion(Distortion::new(k1, k2, p1, p2)))
}

/// Writes intrinsics in the format [`read_intrinsics`] accepts.
pub fn write_intrinsics(path: &Path, intr: &CameraIntrinsics) -> Result<()> {
    let d = intr.distortion;
    let mut text = format!(
        "fx {}\nfy {}\ncx {}\ncy {}\nwidth {}\nheight {}\n",
        intr.fx, intr.fy, intr.cx, intr.cy, intr.width, intr.height
    );
    if !d.is_zero() {
        text.push_str(&format!("k1 {}\nk2 {}\np1 {}\np2 {}\n", d.k1, d.k2, d.p1, d.p2));
    }
    std::fs::write(path, text).map_err(Error::io(path))
}
