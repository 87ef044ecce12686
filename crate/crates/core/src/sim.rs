//! Synthetic-scene oracle: analytic depth rendering plus sensor degradation.
//!
//! Scenes are lists of analytic primitives (planes, axis-aligned boxes,
//! spheres) tagged with an albedo class (how the RGBD sensor sees them) and
//! a texture class (whether SfM can reconstruct them). Rendering intersects
//! one ray per pixel in closed form, so ground truth is exact; the
//! degradation models then fabricate RGBD and SfM-style measurements with
//! known statistics.
//!
//! All stochastic draws come from counter-based per-pixel RNG streams keyed
//! by (seed, stream, frame, pixel), so outputs are bit-reproducible and
//! independent of evaluation order.

use crate::camera::CameraIntrinsics;
use crate::error::{Error, Result};
use crate::geometry::Pose;
use crate::raster::{DepthRaster, VarianceRaster};
use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::fmt;
use std::path::Path;

/// How a surface responds to the structured-light sensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlbedoTag {
    Normal,
    Dark,
    Specular,
}

/// Whether a surface carries enough intensity gradient for SfM.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TextureTag {
    Textured,
    Flat,
}

/// Analytic geometry of one primitive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// Points p with normal . p + offset = 0.
    Plane { normal: Vector3<f64>, offset: f64 },
    /// Axis-aligned box spanning [min, max] per axis.
    Box {
        min: Vector3<f64>,
        max: Vector3<f64>,
    },
    Sphere { center: Vector3<f64>, radius: f64 },
}

const RAY_EPS: f64 = 1e-9;

impl Shape {
    /// Smallest ray parameter s > RAY_EPS where `origin + s * dir` hits the
    /// shape, if any.
    pub fn intersect(&self, origin: Vector3<f64>, dir: Vector3<f64>) -> Option<f64> {
        match *self {
            Shape::Plane { normal, offset } => {
                let denom = normal.dot(&dir);
                if denom.abs() < 1e-12 {
                    return None;
                }
                let s = -(normal.dot(&origin) + offset) / denom;
                (s > RAY_EPS).then_some(s)
            }
            Shape::Box { min, max } => {
                let mut t_enter = f64::NEG_INFINITY;
                let mut t_exit = f64::INFINITY;
                for axis in 0..3 {
                    if dir[axis].abs() < 1e-12 {
                        if origin[axis] < min[axis] || origin[axis] > max[axis] {
                            return None;
                        }
                        continue;
                    }
                    let t0 = (min[axis] - origin[axis]) / dir[axis];
                    let t1 = (max[axis] - origin[axis]) / dir[axis];
                    t_enter = t_enter.max(t0.min(t1));
                    t_exit = t_exit.min(t0.max(t1));
                }
                if t_exit < t_enter || t_exit <= RAY_EPS {
                    return None;
                }
                Some(if t_enter > RAY_EPS { t_enter } else { t_exit })
            }
            Shape::Sphere { center, radius } => {
                let oc = origin - center;
                let a = dir.dot(&dir);
                let b = 2.0 * oc.dot(&dir);
                let c = oc.dot(&oc) - radius * radius;
                let disc = b * b - 4.0 * a * c;
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                let s0 = (-b - sq) / (2.0 * a);
                if s0 > RAY_EPS {
                    return Some(s0);
                }
                let s1 = (-b + sq) / (2.0 * a);
                (s1 > RAY_EPS).then_some(s1)
            }
        }
    }
}

/// One tagged scene primitive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Primitive {
    pub shape: Shape,
    pub albedo: AlbedoTag,
    pub texture: TextureTag,
}

/// A renderable collection of primitives.
#[derive(Debug, Clone, Default)]
pub struct Scene {
    pub primitives: Vec<Primitive>,
}

impl Scene {
    /// Demo room: a textured center wall in RGBD range, a dark textured wall
    /// on the left, a textured wall beyond sensor range on the right, and
    /// untextured floor/ceiling. Exercises every provenance label.
    pub fn demo_room() -> Scene {
        let p = |shape, albedo, texture| Primitive {
            shape,
            albedo,
            texture,
        };
        Scene {
            primitives: vec![
                p(
                    Shape::Box {
                        min: Vector3::new(-6.0, -3.0, 3.4),
                        max: Vector3::new(-0.8, 3.0, 3.6),
                    },
                    AlbedoTag::Dark,
                    TextureTag::Textured,
                ),
                p(
                    Shape::Box {
                        min: Vector3::new(-0.9, -3.0, 4.0),
                        max: Vector3::new(0.9, 3.0, 4.2),
                    },
                    AlbedoTag::Normal,
                    TextureTag::Textured,
                ),
                p(
                    Shape::Box {
                        min: Vector3::new(0.8, -6.0, 7.0),
                        max: Vector3::new(12.0, 6.0, 7.2),
                    },
                    AlbedoTag::Normal,
                    TextureTag::Textured,
                ),
                p(
                    Shape::Plane {
                        normal: Vector3::new(0.0, -1.0, 0.0),
                        offset: 1.9,
                    },
                    AlbedoTag::Normal,
                    TextureTag::Flat,
                ),
                p(
                    Shape::Plane {
                        normal: Vector3::new(0.0, 1.0, 0.0),
                        offset: 1.9,
                    },
                    AlbedoTag::Normal,
                    TextureTag::Flat,
                ),
            ],
        }
    }
}

fn tag_token(albedo: AlbedoTag) -> &'static str {
    match albedo {
        AlbedoTag::Normal => "normal",
        AlbedoTag::Dark => "dark",
        AlbedoTag::Specular => "specular",
    }
}

fn texture_token(texture: TextureTag) -> &'static str {
    match texture {
        TextureTag::Textured => "textured",
        TextureTag::Flat => "flat",
    }
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.shape {
            Shape::Plane { normal, offset } => write!(
                f,
                "plane {} {} {} {} {} {}",
                normal.x,
                normal.y,
                normal.z,
                offset,
                tag_token(self.albedo),
                texture_token(self.texture)
            ),
            Shape::Box { min, max } => write!(
                f,
                "box {} {} {} {} {} {} {} {}",
                min.x,
                min.y,
                min.z,
                max.x,
                max.y,
                max.z,
                tag_token(self.albedo),
                texture_token(self.texture)
            ),
            Shape::Sphere { center, radius } => write!(
                f,
                "sphere {} {} {} {} {} {}",
                center.x,
                center.y,
                center.z,
                radius,
                tag_token(self.albedo),
                texture_token(self.texture)
            ),
        }
    }
}

impl fmt::Display for Scene {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for prim in &self.primitives {
            writeln!(f, "{prim}")?;
        }
        Ok(())
    }
}

/// Parses a plain-text scene description, one primitive per line:
///
/// ```text
/// plane  nx ny nz offset        albedo texture
/// box    minx miny minz maxx maxy maxz  albedo texture
/// sphere cx cy cz radius        albedo texture
/// ```
///
/// `albedo` is one of normal|dark|specular, `texture` textured|flat. Blank
/// lines and lines starting with '#' are ignored.
pub fn parse_scene(path: &Path) -> Result<Scene> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    parse_scene_str(&text, path)
}

pub fn parse_scene_str(text: &str, path: &Path) -> Result<Scene> {
    let mut primitives = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let err = |msg: String| Error::parse(path, lineno + 1, msg);
        let num = |tok: &str| -> Result<f64> {
            tok.parse::<f64>()
                .map_err(|_| err(format!("expected a number, got '{tok}'")))
        };
        let (shape, rest) = match tokens[0] {
            "plane" => {
                if tokens.len() != 7 {
                    return Err(err(format!(
                        "plane takes 6 arguments, got {}",
                        tokens.len() - 1
                    )));
                }
                let normal = Vector3::new(num(tokens[1])?, num(tokens[2])?, num(tokens[3])?);
                if normal.norm() == 0.0 {
                    return Err(err("plane normal must be nonzero".into()));
                }
                (
                    Shape::Plane {
                        normal,
                        offset: num(tokens[4])?,
                    },
                    &tokens[5..],
                )
            }
            "box" => {
                if tokens.len() != 9 {
                    return Err(err(format!(
                        "box takes 8 arguments, got {}",
                        tokens.len() - 1
                    )));
                }
                let min = Vector3::new(num(tokens[1])?, num(tokens[2])?, num(tokens[3])?);
                let max = Vector3::new(num(tokens[4])?, num(tokens[5])?, num(tokens[6])?);
                if min.x >= max.x || min.y >= max.y || min.z >= max.z {
                    return Err(err("box min must be strictly below max per axis".into()));
                }
                (Shape::Box { min, max }, &tokens[7..])
            }
            "sphere" => {
                if tokens.len() != 7 {
                    return Err(err(format!(
                        "sphere takes 6 arguments, got {}",
                        tokens.len() - 1
                    )));
                }
                let center = Vector3::new(num(tokens[1])?, num(tokens[2])?, num(tokens[3])?);
                let radius = num(tokens[4])?;
                if radius <= 0.0 {
                    return Err(err("sphere radius must be positive".into()));
                }
                (Shape::Sphere { center, radius }, &tokens[5..])
            }
            other => return Err(err(format!("unknown primitive type '{other}'"))),
        };
        let albedo = match rest[0] {
            "normal" => AlbedoTag::Normal,
            "dark" => AlbedoTag::Dark,
            "specular" => AlbedoTag::Specular,
            other => return Err(err(format!("unknown albedo tag '{other}'"))),
        };
        let texture = match rest[1] {
            "textured" => TextureTag::Textured,
            "flat" => TextureTag::Flat,
            other => return Err(err(format!("unknown texture tag '{other}'"))),
        };
        primitives.push(Primitive {
            shape,
            albedo,
            texture,
        });
    }
    if primitives.is_empty() {
        return Err(Error::format(path, "scene file contains no primitives"));
    }
    Ok(Scene { primitives })
}

/// Rendered ground truth for one camera: exact depth plus per-pixel tags of
/// the surface that was hit.
#[derive(Debug, Clone)]
pub struct RenderedView {
    pub depth: DepthRaster,
    pub albedo: Vec<Option<AlbedoTag>>,
    pub texture: Vec<Option<TextureTag>>,
}

/// Casts one ray per pixel and keeps the nearest intersection.
pub fn render(scene: &Scene, intr: &CameraIntrinsics, pose: &Pose) -> RenderedView {
    let (w, h) = (intr.width, intr.height);
    let mut depth = DepthRaster::new_invalid(w, h);
    let mut albedo = vec![None; w as usize * h as usize];
    let mut texture = vec![None; w as usize * h as usize];
    let origin = pose.translation;
    for row in 0..h {
        for col in 0..w {
            let (ax, ay) = intr.pixel_ray(col as f64, row as f64);
            // camera-frame ray (ax, ay, 1): the ray parameter equals depth
            let dir = pose.rotation * Vector3::new(ax, ay, 1.0);
            let mut best: Option<(f64, &Primitive)> = None;
            for prim in &scene.primitives {
                if let Some(s) = prim.shape.intersect(origin, dir) {
                    if best.is_none_or(|(bs, _)| s < bs) {
                        best = Some((s, prim));
                    }
                }
            }
            if let Some((s, prim)) = best {
                depth.set(col, row, s);
                let i = depth.index(col, row);
                albedo[i] = Some(prim.albedo);
                texture[i] = Some(prim.texture);
            }
        }
    }
    RenderedView {
        depth,
        albedo,
        texture,
    }
}

/// Depth-only rendering.
pub fn render_depth(scene: &Scene, intr: &CameraIntrinsics, pose: &Pose) -> DepthRaster {
    render(scene, intr, pose).depth
}

/// RGBD dropout probability per albedo tag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropoutRules {
    pub normal: f64,
    pub dark: f64,
    pub specular: f64,
}

impl Default for DropoutRules {
    fn default() -> Self {
        DropoutRules {
            normal: 0.0,
            dark: 1.0,
            specular: 1.0,
        }
    }
}

impl DropoutRules {
    fn probability(&self, tag: AlbedoTag) -> f64 {
        match tag {
            AlbedoTag::Normal => self.normal,
            AlbedoTag::Dark => self.dark,
            AlbedoTag::Specular => self.specular,
        }
    }
}

/// Parameters of the synthetic dataset generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Fixes every stochastic output bit-exactly.
    pub seed: u64,
    /// RGBD sensor range limit, meters.
    pub depth_max: f64,
    pub dropout: DropoutRules,
    /// Fraction of textured pixels that receive an SfM estimate.
    pub sfm_fraction: f64,
    /// Hidden SfM scale: emitted SfM depths and poses are metric / sfm_scale.
    pub sfm_scale: f64,
    /// SfM depth noise as a fraction of depth (in SfM scale).
    pub sfm_noise_frac: f64,
    /// Lower bound on emitted SfM variances (SfM-scale squared meters).
    pub sfm_var_floor: f64,
    /// Multiplier on emitted SfM variances, for miscalibration stress tests.
    pub sfm_var_scale: f64,
    /// Generative RGBD depth-noise coefficient, sigma = coeff * Z^2.
    pub noise_coeff: f64,
    /// Uniform translation perturbation applied to emitted poses, meters.
    pub pose_jitter: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 7,
            depth_max: 5.0,
            dropout: DropoutRules::default(),
            sfm_fraction: 0.3,
            sfm_scale: 0.4,
            sfm_noise_frac: 0.01,
            sfm_var_floor: 1e-8,
            sfm_var_scale: 1.0,
            noise_coeff: crate::noise::DEFAULT_DEPTH_COEFF,
            pose_jitter: 0.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(msg.to_string()))
            }
        };
        check(self.depth_max > 0.0, "depth_max must be positive")?;
        check(
            (0.0..=1.0).contains(&self.sfm_fraction),
            "sfm_fraction must lie in [0, 1]",
        )?;
        check(self.sfm_scale > 0.0, "sfm_scale must be positive")?;
        check(self.sfm_noise_frac >= 0.0, "sfm_noise_frac must be >= 0")?;
        check(self.sfm_var_floor > 0.0, "sfm_var_floor must be positive")?;
        check(self.sfm_var_scale > 0.0, "sfm_var_scale must be positive")?;
        check(self.noise_coeff >= 0.0, "noise_coeff must be >= 0")?;
        check(self.pose_jitter >= 0.0, "pose_jitter must be >= 0")?;
        for p in [
            self.dropout.normal,
            self.dropout.dark,
            self.dropout.specular,
        ] {
            check((0.0..=1.0).contains(&p), "dropout probabilities must lie in [0, 1]")?;
        }
        Ok(())
    }
}

// RNG stream identifiers; draws never cross streams.
const STREAM_RGBD: u64 = 1;
const STREAM_SFM: u64 = 2;
const STREAM_POSE: u64 = 3;

/// Counter-based per-pixel stream: reseeding per (seed, stream, frame, pixel)
/// makes draws independent of pixel evaluation order.
fn pixel_rng(seed: u64, stream: u64, frame: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&stream.to_le_bytes());
    key[16..24].copy_from_slice(&frame.to_le_bytes());
    key[24..32].copy_from_slice(&index.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Applies RGBD failure modes to a ground-truth depth raster: out-of-range
/// and dropout-tagged pixels are invalidated, survivors get zero-mean
/// Gaussian noise with sigma = noise_coeff * Z^2.
///
/// `frame` salts the RNG so different frames draw independent noise.
pub fn degrade_rgbd(
    truth: &DepthRaster,
    albedo: &[Option<AlbedoTag>],
    cfg: &SimConfig,
    frame: u64,
) -> DepthRaster {
    let mut out = DepthRaster::new_invalid(truth.width(), truth.height());
    for (col, row, z) in truth.iter_valid() {
        if z > cfg.depth_max {
            continue;
        }
        let i = truth.index(col, row);
        let prob = albedo[i].map_or(0.0, |t| cfg.dropout.probability(t));
        let mut rng = pixel_rng(cfg.seed, STREAM_RGBD, frame, i as u64);
        if prob > 0.0 && rng.gen::<f64>() < prob {
            continue;
        }
        let measured = if cfg.noise_coeff > 0.0 {
            let n: f64 = rng.sample(StandardNormal);
            z + n * cfg.noise_coeff * z * z
        } else {
            z
        };
        if measured > 0.0 {
            out.set(col, row, measured);
        }
    }
    out
}

/// Emulates a semi-dense SfM keyframe from ground truth: only a seeded
/// subsample of textured pixels carries an estimate, depths are divided by
/// the hidden scale and perturbed, and the variance raster reports the
/// (floored) generating noise variance in SfM-scale units.
pub fn degrade_sfm(
    truth: &DepthRaster,
    texture: &[Option<TextureTag>],
    cfg: &SimConfig,
    frame: u64,
) -> (DepthRaster, VarianceRaster) {
    let mut depth = DepthRaster::new_invalid(truth.width(), truth.height());
    let mut var = VarianceRaster::new_invalid(truth.width(), truth.height());
    for (col, row, z) in truth.iter_valid() {
        let i = truth.index(col, row);
        if texture[i] != Some(TextureTag::Textured) {
            continue;
        }
        let mut rng = pixel_rng(cfg.seed, STREAM_SFM, frame, i as u64);
        if rng.gen::<f64>() >= cfg.sfm_fraction {
            continue;
        }
        let mu0 = z / cfg.sfm_scale;
        let sigma = cfg.sfm_noise_frac * mu0;
        let mu = if sigma > 0.0 {
            let n: f64 = rng.sample(StandardNormal);
            mu0 + n * sigma
        } else {
            mu0
        };
        if mu <= 0.0 {
            continue;
        }
        depth.set(col, row, mu);
        var.set(col, row, (sigma * sigma).max(cfg.sfm_var_floor) * cfg.sfm_var_scale);
    }
    (depth, var)
}

/// Straight-line trajectory from `start` to `end` with identity rotation.
pub fn line_trajectory(
    start: Vector3<f64>,
    end: Vector3<f64>,
    frames: usize,
    fps: f64,
) -> Vec<Pose> {
    (0..frames)
        .map(|i| {
            let t = if frames > 1 {
                i as f64 / (frames - 1) as f64
            } else {
                0.0
            };
            Pose::new(
                UnitQuaternion::identity(),
                start + (end - start) * t,
                i as f64 / fps,
            )
        })
        .collect()
}

/// Arc around the look-at point (0, 0, radius), starting at the origin
/// facing +z and sweeping `span` radians.
pub fn orbit_trajectory(radius: f64, span: f64, frames: usize, fps: f64) -> Vec<Pose> {
    let center = Vector3::new(0.0, 0.0, radius);
    (0..frames)
        .map(|i| {
            let theta = if frames > 1 {
                span * i as f64 / (frames - 1) as f64
            } else {
                0.0
            };
            let position = center + radius * Vector3::new(theta.sin(), 0.0, -theta.cos());
            let rotation = UnitQuaternion::from_axis_angle(&Vector3::y_axis(), -theta);
            Pose::new(rotation, position, i as f64 / fps)
        })
        .collect()
}

/// Default demo trajectory: a slow sideways-and-forward drift with a gentle
/// sinusoidal yaw, staying inside the demo room.
pub fn demo_trajectory(frames: usize, fps: f64) -> Vec<Pose> {
    (0..frames)
        .map(|i| {
            let t = if frames > 1 {
                i as f64 / (frames - 1) as f64
            } else {
                0.0
            };
            let yaw = 0.03 * (std::f64::consts::TAU * t).sin();
            Pose::new(
                UnitQuaternion::from_axis_angle(&Vector3::y_axis(), yaw),
                Vector3::new(0.5 * t, 0.0, 0.3 * t),
                i as f64 / fps,
            )
        })
        .collect()
}

/// What [`generate_dataset`] wrote.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSummary {
    pub frames: usize,
    pub keyframes: usize,
}

/// Renders and writes a complete on-disk dataset with ground truth.
///
/// Layout under `root`: `intrinsics.txt`, `trajectory.txt`, `scene.txt`,
/// `depth/<ts>.png` per frame, `keyframes/<ts>.depth.pfm` + `.var.pfm` every
/// `stride` frames, and `truth/<ts>.pfm` per frame.
///
/// Emitted poses and keyframe depths share the hidden SfM scale, as a
/// monocular SLAM system's output would; ground-truth rasters and RGBD depth
/// stay metric.
pub fn generate_dataset(
    scene: &Scene,
    intr: &CameraIntrinsics,
    trajectory: &[Pose],
    stride: usize,
    cfg: &SimConfig,
    root: &Path,
) -> Result<DatasetSummary> {
    use crate::dataio;

    cfg.validate()?;
    if trajectory.is_empty() {
        return Err(Error::EmptyInput("trajectory has no poses"));
    }
    if stride == 0 {
        return Err(Error::Config("keyframe stride must be at least 1".into()));
    }

    for sub in ["depth", "keyframes", "truth"] {
        std::fs::create_dir_all(root.join(sub)).map_err(Error::io(root.join(sub)))?;
    }
    dataio::write_intrinsics(&root.join("intrinsics.txt"), intr)?;
    std::fs::write(root.join("scene.txt"), scene.to_string())
        .map_err(Error::io(root.join("scene.txt")))?;

    // Poses are emitted in SfM scale (translations divided by the hidden
    // scale), consistent with the keyframe depth maps.
    let emitted: Vec<Pose> = trajectory
        .iter()
        .enumerate()
        .map(|(i, pose)| {
            let mut translation = pose.translation / cfg.sfm_scale;
            if cfg.pose_jitter > 0.0 {
                let mut rng = pixel_rng(cfg.seed, STREAM_POSE, i as u64, 0);
                for axis in 0..3 {
                    translation[axis] += rng.gen_range(-cfg.pose_jitter..=cfg.pose_jitter);
                }
            }
            Pose::new(pose.rotation, translation, pose.timestamp)
        })
        .collect();
    dataio::write_trajectory(&root.join("trajectory.txt"), &emitted)?;

    let mut keyframes = 0usize;
    for (i, pose) in trajectory.iter().enumerate() {
        let view = render(scene, intr, pose);
        let ts = dataio::format_timestamp(pose.timestamp);

        let rgbd = degrade_rgbd(&view.depth, &view.albedo, cfg, i as u64);
        dataio::write_depth_png(&root.join("depth").join(format!("{ts}.png")), &rgbd)?;
        dataio::write_pfm(&root.join("truth").join(format!("{ts}.pfm")), &view.depth)?;

        if i % stride == 0 {
            let (sfm_d, sfm_v) = degrade_sfm(&view.depth, &view.texture, cfg, i as u64);
            dataio::write_pfm(
                &root.join("keyframes").join(format!("{ts}.depth.pfm")),
                &sfm_d,
            )?;
            dataio::write_pfm(&root.join("keyframes").join(format!("{ts}.var.pfm")), &sfm_v)?;
            keyframes += 1;
        }
    }

    Ok(DatasetSummary {
        frames: trajectory.len(),
        keyframes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scale::{estimate_scale, ScaleMode};
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;

    fn intr() -> CameraIntrinsics {
        CameraIntrinsics::new(525.0, 525.0, 319.5, 239.5, 640, 480).unwrap()
    }

    fn small_intr() -> CameraIntrinsics {
        CameraIntrinsics::new(60.0, 60.0, 39.5, 29.5, 80, 60).unwrap()
    }

    fn plane_scene(normal: Vector3<f64>, offset: f64) -> Scene {
        Scene {
            primitives: vec![Primitive {
                shape: Shape::Plane { normal, offset },
                albedo: AlbedoTag::Normal,
                texture: TextureTag::Textured,
            }],
        }
    }

    fn fronto_plane(z: f64) -> Scene {
        plane_scene(Vector3::new(0.0, 0.0, 1.0), -z)
    }

    #[test]
    fn fronto_parallel_plane_renders_constant_depth() {
        let depth = render_depth(&fronto_plane(3.0), &intr(), &Pose::identity(0.0));
        assert_eq!(depth.valid_count(), 640 * 480);
        for (_, _, z) in depth.iter_valid() {
            assert_relative_eq!(z, 3.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn camera_translation_shortens_plane_depth() {
        let pose = Pose::new(UnitQuaternion::identity(), Vector3::new(0.0, 0.0, 1.0), 0.0);
        let depth = render_depth(&fronto_plane(3.0), &intr(), &pose);
        for (_, _, z) in depth.iter_valid() {
            assert_relative_eq!(z, 2.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn tilted_plane_matches_closed_form_at_random_pixels() {
        let normal = Vector3::new(0.3, -0.2, 1.0);
        let offset = -4.0;
        let scene = plane_scene(normal, offset);
        let intr = intr();
        let depth = render_depth(&scene, &intr, &Pose::identity(0.0));
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..20 {
            let col = rng.gen_range(0..640);
            let row = rng.gen_range(0..480);
            let (ax, ay) = intr.pixel_ray(col as f64, row as f64);
            let ray = Vector3::new(ax, ay, 1.0);
            let expect = -offset / normal.dot(&ray);
            if expect > 0.0 {
                assert_relative_eq!(depth.get(col, row).unwrap(), expect, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn nearest_primitive_wins() {
        let mut scene = fronto_plane(3.0);
        scene.primitives.push(Primitive {
            shape: Shape::Sphere {
                center: Vector3::new(0.0, 0.0, 2.0),
                radius: 0.5,
            },
            albedo: AlbedoTag::Dark,
            texture: TextureTag::Flat,
        });
        let view = render(&scene, &small_intr(), &Pose::identity(0.0));
        // center pixel hits the sphere front; closed-form smallest root
        let (ax, ay) = small_intr().pixel_ray(39.0, 29.0);
        let d = Vector3::new(ax, ay, 1.0);
        let oc = -Vector3::new(0.0, 0.0, 2.0);
        let (a, b, c) = (d.dot(&d), 2.0 * oc.dot(&d), oc.dot(&oc) - 0.25);
        let expect = (-b - (b * b - 4.0 * a * c).sqrt()) / (2.0 * a);
        let center = view.depth.get(39, 29).unwrap();
        assert_relative_eq!(center, expect, epsilon = 1e-9);
        assert_eq!(view.albedo[view.depth.index(39, 29)], Some(AlbedoTag::Dark));
        // corner pixel misses the sphere and hits the plane
        let corner = view.depth.get(0, 0).unwrap();
        assert_relative_eq!(corner, 3.0, epsilon = 1e-9);
    }

    #[test]
    fn out_of_range_pixels_are_dropped() {
        let cfg = SimConfig::default();
        let view = render(&fronto_plane(6.0), &small_intr(), &Pose::identity(0.0));
        let rgbd = degrade_rgbd(&view.depth, &view.albedo, &cfg, 0);
        assert_eq!(rgbd.valid_count(), 0);
    }

    #[test]
    fn dark_tagged_pixels_are_dropped_normal_retained() {
        let mut scene = fronto_plane(3.0);
        scene.primitives[0].albedo = AlbedoTag::Normal;
        // dark slab covering the left half of the view, nearer than the plane
        scene.primitives.push(Primitive {
            shape: Shape::Box {
                min: Vector3::new(-10.0, -10.0, 2.0),
                max: Vector3::new(0.0, 10.0, 2.1),
            },
            albedo: AlbedoTag::Dark,
            texture: TextureTag::Flat,
        });
        let cfg = SimConfig {
            noise_coeff: 0.0,
            ..SimConfig::default()
        };
        let view = render(&scene, &small_intr(), &Pose::identity(0.0));
        let rgbd = degrade_rgbd(&view.depth, &view.albedo, &cfg, 0);
        for (col, row, z) in view.depth.iter_valid() {
            let dark = view.albedo[view.depth.index(col, row)] == Some(AlbedoTag::Dark);
            assert_eq!(rgbd.is_valid(col, row), !dark);
            if dark {
                // box front face at z = 2: the ray parameter equals the
                // slab-entry depth exactly
                assert!((z - 2.0).abs() < 1e-9);
            }
        }
        assert!(rgbd.valid_count() > 0);
    }

    #[test]
    fn noise_free_degradation_preserves_truth() {
        let cfg = SimConfig {
            noise_coeff: 0.0,
            ..SimConfig::default()
        };
        let view = render(&fronto_plane(3.0), &small_intr(), &Pose::identity(0.0));
        let rgbd = degrade_rgbd(&view.depth, &view.albedo, &cfg, 0);
        for (c, r, z) in rgbd.iter_valid() {
            assert_eq!(z, view.depth.get(c, r).unwrap());
        }
    }

    #[test]
    fn degradation_masks_are_subsets_of_truth() {
        let cfg = SimConfig::default();
        let view = render(&Scene::demo_room(), &small_intr(), &Pose::identity(0.0));
        let rgbd = degrade_rgbd(&view.depth, &view.albedo, &cfg, 0);
        let (sfm_d, sfm_v) = degrade_sfm(&view.depth, &view.texture, &cfg, 0);
        for r in 0..view.depth.height() {
            for c in 0..view.depth.width() {
                if !view.depth.is_valid(c, r) {
                    assert!(!rgbd.is_valid(c, r));
                    assert!(!sfm_d.is_valid(c, r));
                }
            }
        }
        assert!(sfm_d.same_mask(&sfm_v));
    }

    #[test]
    fn zero_fraction_gives_empty_keyframe() {
        let cfg = SimConfig {
            sfm_fraction: 0.0,
            ..SimConfig::default()
        };
        let view = render(&fronto_plane(3.0), &small_intr(), &Pose::identity(0.0));
        let (sfm_d, _) = degrade_sfm(&view.depth, &view.texture, &cfg, 0);
        assert_eq!(sfm_d.valid_count(), 0);
    }

    #[test]
    fn unit_hidden_scale_and_zero_noise_reproduce_truth() {
        let cfg = SimConfig {
            sfm_scale: 1.0,
            sfm_noise_frac: 0.0,
            ..SimConfig::default()
        };
        let view = render(&fronto_plane(3.0), &small_intr(), &Pose::identity(0.0));
        let (sfm_d, _) = degrade_sfm(&view.depth, &view.texture, &cfg, 0);
        assert!(sfm_d.valid_count() > 0);
        for (c, r, mu) in sfm_d.iter_valid() {
            assert_eq!(mu, view.depth.get(c, r).unwrap());
        }
    }

    #[test]
    fn hidden_scale_two_is_recovered_by_the_estimator() {
        let cfg = SimConfig {
            sfm_scale: 2.0,
            sfm_noise_frac: 0.0,
            sfm_fraction: 1.0,
            ..SimConfig::default()
        };
        let view = render(&fronto_plane(3.0), &small_intr(), &Pose::identity(0.0));
        let (sfm_d, _) = degrade_sfm(&view.depth, &view.texture, &cfg, 0);
        for (c, r, mu) in sfm_d.iter_valid() {
            assert_eq!(mu, view.depth.get(c, r).unwrap() / 2.0);
        }
        for mode in [ScaleMode::LeastSquares, ScaleMode::MeanRatio] {
            let est = estimate_scale(&view.depth, &sfm_d, mode, 50, None).unwrap();
            assert_relative_eq!(est.alpha, 2.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn dataset_counts_follow_stride() {
        let dir = tempfile::tempdir().unwrap();
        let scene = Scene::demo_room();
        let traj = demo_trajectory(10, 30.0);
        let cfg = SimConfig::default();
        let summary =
            generate_dataset(&scene, &small_intr(), &traj, 5, &cfg, dir.path()).unwrap();
        assert_eq!(summary.frames, 10);
        assert_eq!(summary.keyframes, 2);
        assert_eq!(std::fs::read_dir(dir.path().join("depth")).unwrap().count(), 10);
        assert_eq!(
            std::fs::read_dir(dir.path().join("keyframes")).unwrap().count(),
            4
        );
        assert_eq!(std::fs::read_dir(dir.path().join("truth")).unwrap().count(), 10);
    }

    #[test]
    fn same_seed_produces_byte_identical_datasets() {
        let scene = Scene::demo_room();
        let traj = demo_trajectory(4, 30.0);
        let cfg = SimConfig::default();
        let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
        for dir in &dirs {
            generate_dataset(&scene, &small_intr(), &traj, 2, &cfg, dir.path()).unwrap();
        }
        let hash_a = crate::test_support::hash_dir(dirs[0].path());
        let hash_b = crate::test_support::hash_dir(dirs[1].path());
        assert_eq!(hash_a, hash_b);

        let other = tempfile::tempdir().unwrap();
        let cfg2 = SimConfig {
            seed: 8,
            ..SimConfig::default()
        };
        generate_dataset(&scene, &small_intr(), &traj, 2, &cfg2, other.path()).unwrap();
        assert_ne!(hash_a, crate::test_support::hash_dir(other.path()));
    }

    #[test]
    fn scene_text_round_trips() {
        let scene = Scene::demo_room();
        let text = scene.to_string();
        let parsed = parse_scene_str(&text, Path::new("demo")).unwrap();
        assert_eq!(parsed.primitives, scene.primitives);
    }

    #[test]
    fn scene_parser_rejects_malformed_lines() {
        let bad = [
            "plane 0 0 1 -3 normal",          // missing texture tag
            "plane 0 0 0 -3 normal textured", // zero normal
            "box 0 0 0 1 1 1 shiny textured", // unknown albedo
            "cone 0 0 0 1 normal flat",       // unknown primitive
            "sphere 0 0 0 x normal flat",     // non-numeric radius
        ];
        for line in bad {
            assert!(parse_scene_str(line, Path::new("t")).is_err(), "{line}");
        }
    }
}
