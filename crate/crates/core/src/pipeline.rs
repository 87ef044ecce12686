//! End-to-end fusion pipeline over an on-disk dataset.
//!
//! For every RGBD frame in timestamp order: select the governing keyframe,
//! warp its SfM depth into the frame, estimate and apply the SfM scale,
//! derive the RGBD variance from the sensor noise model, fuse per pixel, and
//! write the fused depth, variance, provenance, and sigma visualization plus
//! one stats row. Frames run strictly in order because the scale-fallback
//! chain is sequential; two runs over the same dataset produce byte-identical
//! outputs.

use crate::camera::CameraIntrinsics;
use crate::dataio::{self, Dataset};
use crate::error::{Error, Result};
use crate::fusion::{
    colorize_provenance, fuse_frame, sequence_stats, sigma_image, FrameStats, FusionGate,
    SequenceStats,
};
use crate::geometry::InterpMode;
use crate::noise::RgbdNoiseModel;
use crate::registration::{register_sfm_depth, select_keyframe, Keyframe, TrackedFrame};
use crate::scale::{apply_scale, estimate_scale, ScaleEstimate, ScaleMode};
use std::path::{Path, PathBuf};

/// Everything the fuse pipeline needs to run.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub dataset_root: PathBuf,
    /// Outputs go to `<output_root>/fused`; defaults to the dataset root.
    pub output_root: PathBuf,
    pub interp: InterpMode,
    pub scale_mode: ScaleMode,
    /// Freeze the first trusted scale estimate for the whole sequence.
    pub scale_once: bool,
    pub min_support: usize,
    /// RGBD noise coefficient, sigma = coeff * Z^2.
    pub noise_coeff: f64,
    pub gate: FusionGate,
    /// Upper end of the sigma visualization gray ramp, meters.
    pub sigma_viz_max: f64,
}

impl PipelineConfig {
    pub fn new(dataset_root: impl Into<PathBuf>) -> Self {
        let dataset_root = dataset_root.into();
        PipelineConfig {
            output_root: dataset_root.clone(),
            dataset_root,
            interp: InterpMode::Bilinear,
            scale_mode: ScaleMode::LeastSquares,
            scale_once: false,
            min_support: crate::scale::DEFAULT_MIN_SUPPORT,
            noise_coeff: crate::noise::DEFAULT_DEPTH_COEFF,
            gate: FusionGate::Off,
            sigma_viz_max: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(format!("{what} must be positive")))
            }
        };
        positive(self.noise_coeff > 0.0, "noise_coeff")?;
        positive(self.min_support > 0, "min_support")?;
        positive(self.sigma_viz_max > 0.0, "sigma_viz_max")?;
        if let FusionGate::KSigma(k) = self.gate {
            positive(k > 0.0, "fusion gate k")?;
        }
        Ok(())
    }
}

/// Summary of one pipeline run.
#[derive(Debug, Clone)]
pub struct FuseReport {
    pub frames: usize,
    pub fused_dir: PathBuf,
    pub stats: SequenceStats,
    /// Scale estimate applied per frame, in frame order; `None` where the
    /// frame was fused RGBD-only.
    pub scales: Vec<Option<ScaleEstimate>>,
}

fn load_keyframes(ds: &Dataset) -> Result<Vec<Keyframe>> {
    ds.keyframes
        .iter()
        .map(|entry| {
            let depth = dataio::read_pfm(&entry.depth_path)?;
            let var = dataio::read_pfm(&entry.var_path)?;
            if depth.iter_valid().any(|(_, _, z)| z <= 0.0) {
                return Err(Error::Format {
                    file: entry.depth_path.clone(),
                    msg: "keyframe depth contains non-positive values".into(),
                });
            }
            if var.iter_valid().any(|(_, _, v)| v <= 0.0) {
                return Err(Error::Format {
                    file: entry.var_path.clone(),
                    msg: "keyframe variance contains non-positive values".into(),
                });
            }
            let pose = *ds.trajectory.pose_at(entry.timestamp)?;
            Keyframe::new(entry.id, entry.timestamp, pose, depth, var)
        })
        .collect()
}

/// Runs the fuse pipeline; see the module docs for the per-frame steps.
pub fn run_fuse(cfg: &PipelineConfig) -> Result<FuseReport> {
    cfg.validate()?;
    let ds = Dataset::open(&cfg.dataset_root)?;
    let noise = RgbdNoiseModel::new(cfg.noise_coeff)?;
    let keyframes = load_keyframes(&ds)?;
    if keyframes.is_empty() {
        log::warn!("dataset has no keyframes; every frame will be RGBD-only");
    }

    let fused_dir = cfg.output_root.join("fused");
    std::fs::create_dir_all(&fused_dir).map_err(Error::io(&fused_dir))?;

    let mut prev_scale: Option<ScaleEstimate> = None;
    let mut frozen_scale: Option<ScaleEstimate> = None;
    let mut stats_rows: Vec<FrameStats> = Vec::with_capacity(ds.frames.len());
    let mut scales: Vec<Option<ScaleEstimate>> = Vec::with_capacity(ds.frames.len());

    for entry in &ds.frames {
        let rgbd = dataio::read_depth_png(&entry.depth_path)?;
        let pose = *ds.trajectory.pose_at(entry.timestamp)?;
        let rgbd_var = noise.variance_raster(&rgbd);

        let governing = select_keyframe(entry.timestamp, &keyframes).ok();
        let mut sfm_scaled = None;
        let mut scale_est: Option<ScaleEstimate> = None;

        if let Some(kf) = governing {
            let frame = TrackedFrame {
                timestamp: entry.timestamp,
                pose,
                rgbd_depth: rgbd.clone(),
                keyframe_id: Some(kf.id),
            };
            let (sfm_depth, sfm_var) = register_sfm_depth(kf, &frame, &ds.intrinsics, cfg.interp)?;

            let est = match &frozen_scale {
                Some(frozen) => Some(ScaleEstimate {
                    fallback: true,
                    ..*frozen
                }),
                None => match estimate_scale(
                    &rgbd,
                    &sfm_depth,
                    cfg.scale_mode,
                    cfg.min_support,
                    prev_scale.as_ref(),
                ) {
                    Ok(est) => Some(est),
                    Err(Error::NoScale { support, .. }) => {
                        log::warn!(
                            "frame {:.6}: scale support {support} below minimum and no prior; fusing RGBD-only",
                            entry.timestamp
                        );
                        None
                    }
                    Err(e) => return Err(e),
                },
            };

            if let Some(est) = est {
                if cfg.scale_once && frozen_scale.is_none() && !est.fallback {
                    frozen_scale = Some(est);
                }
                prev_scale = Some(est);
                sfm_scaled = Some(apply_scale(&sfm_depth, &sfm_var, &est));
                scale_est = Some(est);
            }
        }

        let fused = fuse_frame(
            entry.timestamp,
            &rgbd,
            &rgbd_var,
            sfm_scaled.as_ref().map(|(d, _)| d),
            sfm_scaled.as_ref().map(|(_, v)| v),
            scale_est,
            cfg.gate,
        )?;

        let ts = dataio::format_timestamp(entry.timestamp);
        dataio::write_pfm(&fused_dir.join(format!("{ts}.depth.pfm")), &fused.depth)?;
        dataio::write_pfm(&fused_dir.join(format!("{ts}.var.pfm")), &fused.variance)?;
        colorize_provenance(&fused.provenance)
            .save(fused_dir.join(format!("{ts}.provenance.png")))
            .map_err(|source| Error::Image {
                file: fused_dir.join(format!("{ts}.provenance.png")),
                source,
            })?;
        sigma_image(&fused.variance, cfg.sigma_viz_max)
            .save(fused_dir.join(format!("{ts}.sigma.png")))
            .map_err(|source| Error::Image {
                file: fused_dir.join(format!("{ts}.sigma.png")),
                source,
            })?;

        log::info!(
            "frame t={:.6} kf={} alpha={} support={} rgbd_only={} sfm_only={} fused={}",
            entry.timestamp,
            governing.map_or("none".into(), |kf| kf.id.to_string()),
            scale_est.map_or("none".into(), |e| format!("{:.6}", e.alpha)),
            scale_est.map_or(0, |e| e.support),
            fused.stats.rgbd_only,
            fused.stats.sfm_only,
            fused.stats.fused,
        );
        stats_rows.push(fused.stats);
        scales.push(scale_est);
    }

    let stats = sequence_stats(&stats_rows)?;
    dataio::write_stats_csv(&fused_dir.join("stats.csv"), &stats)?;

    Ok(FuseReport {
        frames: stats_rows.len(),
        fused_dir,
        stats,
        scales,
    })
}

/// Re-aggregates a written stats.csv into rows plus a freshly computed
/// average (the summary the `stats` command prints).
pub fn summarize_stats(fused_dir: &Path) -> Result<(Vec<dataio::StatsRow>, (f64, f64, f64))> {
    let rows = dataio::read_stats_csv(&fused_dir.join("stats.csv"))?;
    let n = rows.len() as f64;
    let mut sum = (0.0, 0.0, 0.0);
    for r in &rows {
        sum.0 += r.rgbd_only_pct;
        sum.1 += r.sfm_only_pct;
        sum.2 += r.fused_pct;
    }
    Ok((rows, (sum.0 / n, sum.1 / n, sum.2 / n)))
}

/// Loads intrinsics for callers that fabricate datasets programmatically.
pub fn default_intrinsics() -> CameraIntrinsics {
    CameraIntrinsics::new(525.0, 525.0, 319.5, 239.5, 640, 480)
        .expect("default intrinsics are valid")
}
