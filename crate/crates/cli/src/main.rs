//! Command-line driver: simulate synthetic datasets, fuse RGBD + SfM depth,
//! and summarize provenance statistics.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.

use clap::{Args, Parser, Subcommand};
use depthfuse_core::dataio;
use depthfuse_core::fusion::FusionGate;
use depthfuse_core::geometry::InterpMode;
use depthfuse_core::pipeline::{self, run_fuse, PipelineConfig};
use depthfuse_core::scale::ScaleMode;
use depthfuse_core::sim::{self, Scene, SimConfig};
use depthfuse_core::Error;
use nalgebra::Vector3;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "depthfuse",
    version,
    about = "Fuse structured-light RGBD depth with semi-dense SfM depth estimates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with ground truth
    Simulate(SimulateArgs),
    /// Run the fusion pipeline over a dataset
    Fuse(FuseArgs),
    /// Print the Table-style summary of a fused output directory
    Stats(StatsArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Output dataset directory
    #[arg(long)]
    out: PathBuf,
    /// Scene file (one primitive per line); defaults to the built-in room
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Intrinsics file; defaults to a 640x480 f=525 camera
    #[arg(long)]
    intrinsics: Option<PathBuf>,
    /// Number of frames
    #[arg(long, default_value_t = 100)]
    frames: usize,
    /// Frames per second
    #[arg(long, default_value_t = 30.0)]
    fps: f64,
    /// Keyframe stride
    #[arg(long, default_value_t = 10)]
    stride: usize,
    /// RNG seed; equal seeds give byte-identical datasets
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Straight-line trajectory to "dx,dy,dz" (meters)
    #[arg(long, value_name = "DX,DY,DZ", conflicts_with_all = ["orbit", "trajectory"])]
    line: Option<String>,
    /// Orbit trajectory: radius or "radius,span_radians"
    #[arg(long, value_name = "R[,SPAN]", conflicts_with = "trajectory")]
    orbit: Option<String>,
    /// Explicit trajectory file (metric camera-to-world poses)
    #[arg(long)]
    trajectory: Option<PathBuf>,
    /// Hidden SfM scale: emitted SfM depths and poses are metric / this
    #[arg(long, default_value_t = 0.4)]
    sfm_scale: f64,
    /// Fraction of textured pixels carrying an SfM estimate
    #[arg(long, default_value_t = 0.3)]
    sfm_fraction: f64,
    /// SfM depth noise as a fraction of depth
    #[arg(long, default_value_t = 0.01)]
    sfm_noise: f64,
    /// RGBD sensor range limit, meters
    #[arg(long, default_value_t = 5.0)]
    depth_max: f64,
    /// Generative RGBD noise coefficient (sigma = coeff * Z^2)
    #[arg(long, default_value_t = depthfuse_core::noise::DEFAULT_DEPTH_COEFF)]
    noise_coeff: f64,
    /// Uniform translation jitter on emitted poses, meters
    #[arg(long, default_value_t = 0.0)]
    pose_jitter: f64,
}

#[derive(Args)]
struct FuseArgs {
    /// Dataset root directory
    dataset: PathBuf,
    /// Output root (defaults to the dataset root); outputs go to <root>/fused
    #[arg(long)]
    output: Option<PathBuf>,
    /// Config file with the same key-value grammar as intrinsics.txt;
    /// flags override file values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Interpolation mode: nearest|bilinear
    #[arg(long)]
    interp: Option<String>,
    /// Scale estimator: least_squares|mean_ratio
    #[arg(long)]
    scale_mode: Option<String>,
    /// Freeze the first trusted scale estimate for the whole sequence
    #[arg(long)]
    scale_once: bool,
    /// Minimum overlap pixels for a trusted scale estimate
    #[arg(long)]
    min_support: Option<usize>,
    /// RGBD noise coefficient (sigma = coeff * Z^2)
    #[arg(long)]
    noise_coeff: Option<f64>,
    /// Fusion consistency gate: "off" or a k-sigma factor
    #[arg(long)]
    gate: Option<String>,
    /// Upper end of the sigma visualization gray ramp, meters
    #[arg(long)]
    sigma_viz_max: Option<f64>,
}

#[derive(Args)]
struct StatsArgs {
    /// Fused output directory containing stats.csv
    fused_dir: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Fuse(args) => cmd_fuse(args),
        Command::Stats(args) => cmd_stats(args),
    };

    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            if e.is_data_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}

fn usage(msg: String) -> Error {
    Error::Config(msg)
}

fn parse_triple(s: &str) -> Result<Vector3<f64>, Error> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(usage(format!("expected dx,dy,dz but got '{s}'")));
    }
    let mut v = [0.0; 3];
    for (i, p) in parts.iter().enumerate() {
        v[i] = p
            .trim()
            .parse()
            .map_err(|_| usage(format!("'{p}' is not a number")))?;
    }
    Ok(Vector3::new(v[0], v[1], v[2]))
}

fn cmd_simulate(args: SimulateArgs) -> Result<ExitCode, Error> {
    let scene = match &args.scene {
        Some(path) => sim::parse_scene(path)?,
        None => Scene::demo_room(),
    };
    let intr = match &args.intrinsics {
        Some(path) => dataio::read_intrinsics(path)?,
        None => pipeline::default_intrinsics(),
    };
    let trajectory = if let Some(path) = &args.trajectory {
        dataio::read_trajectory(path)?.entries().to_vec()
    } else if let Some(spec) = &args.line {
        let end = parse_triple(spec)?;
        sim::line_trajectory(Vector3::zeros(), end, args.frames, args.fps)
    } else if let Some(spec) = &args.orbit {
        let parts: Vec<&str> = spec.split(',').collect();
        let radius: f64 = parts[0]
            .trim()
            .parse()
            .map_err(|_| usage(format!("orbit radius '{}' is not a number", parts[0])))?;
        let span: f64 = match parts.get(1) {
            Some(s) => s
                .trim()
                .parse()
                .map_err(|_| usage(format!("orbit span '{s}' is not a number")))?,
            None => 0.5,
        };
        sim::orbit_trajectory(radius, span, args.frames, args.fps)
    } else {
        sim::demo_trajectory(args.frames, args.fps)
    };

    let cfg = SimConfig {
        seed: args.seed,
        depth_max: args.depth_max,
        sfm_fraction: args.sfm_fraction,
        sfm_scale: args.sfm_scale,
        sfm_noise_frac: args.sfm_noise,
        noise_coeff: args.noise_coeff,
        pose_jitter: args.pose_jitter,
        ..SimConfig::default()
    };
    let summary = sim::generate_dataset(&scene, &intr, &trajectory, args.stride, &cfg, &args.out)?;
    println!(
        "wrote {} frames and {} keyframes to {}",
        summary.frames,
        summary.keyframes,
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn parse_gate(value: &str) -> Result<FusionGate, Error> {
    if value == "off" {
        return Ok(FusionGate::Off);
    }
    let k: f64 = value
        .parse()
        .map_err(|_| usage(format!("gate must be 'off' or a positive number, got '{value}'")))?;
    if k > 0.0 {
        Ok(FusionGate::KSigma(k))
    } else {
        Err(usage(format!("gate factor must be positive, got {k}")))
    }
}

/// Applies config-file values, then flag overrides, onto the defaults.
fn build_pipeline_config(args: &FuseArgs) -> Result<PipelineConfig, Error> {
    let mut cfg = PipelineConfig::new(&args.dataset);

    if let Some(path) = &args.config {
        for (key, value, line) in dataio::read_kv_file(path)? {
            let bad_value =
                |msg: String| Error::parse(path.clone(), line, format!("key '{key}': {msg}"));
            match key.as_str() {
                "interp" => cfg.interp = value.parse::<InterpMode>().map_err(|e| bad_value(e.to_string()))?,
                "scale_mode" => {
                    cfg.scale_mode = value.parse::<ScaleMode>().map_err(|e| bad_value(e.to_string()))?
                }
                "scale_once" => {
                    cfg.scale_once = match value.as_str() {
                        "true" | "1" => true,
                        "false" | "0" => false,
                        other => return Err(bad_value(format!("expected true|false, got '{other}'"))),
                    }
                }
                "min_support" => {
                    cfg.min_support = value
                        .parse()
                        .map_err(|_| bad_value(format!("'{value}' is not a count")))?
                }
                "noise_coeff" => {
                    cfg.noise_coeff = value
                        .parse()
                        .map_err(|_| bad_value(format!("'{value}' is not a number")))?
                }
                "gate" => cfg.gate = parse_gate(&value).map_err(|e| bad_value(e.to_string()))?,
                "sigma_viz_max" => {
                    cfg.sigma_viz_max = value
                        .parse()
                        .map_err(|_| bad_value(format!("'{value}' is not a number")))?
                }
                other => return Err(Error::parse(path.clone(), line, format!("unknown key '{other}'"))),
            }
        }
    }

    if let Some(out) = &args.output {
        cfg.output_root = out.clone();
    }
    if let Some(mode) = &args.interp {
        cfg.interp = mode.parse()?;
    }
    if let Some(mode) = &args.scale_mode {
        cfg.scale_mode = mode.parse()?;
    }
    if args.scale_once {
        cfg.scale_once = true;
    }
    if let Some(n) = args.min_support {
        cfg.min_support = n;
    }
    if let Some(c) = args.noise_coeff {
        cfg.noise_coeff = c;
    }
    if let Some(gate) = &args.gate {
        cfg.gate = parse_gate(gate)?;
    }
    if let Some(v) = args.sigma_viz_max {
        cfg.sigma_viz_max = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_fuse(args: FuseArgs) -> Result<ExitCode, Error> {
    let cfg = match build_pipeline_config(&args) {
        Ok(cfg) => cfg,
        // configuration problems are usage errors, not data errors
        Err(e @ (Error::Config(_) | Error::Parse { .. })) => {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(1));
        }
        Err(e) => return Err(e),
    };
    let report = run_fuse(&cfg)?;
    println!(
        "fused {} frames into {} (avg rgbd_only {:.1}% sfm_only {:.1}% fused {:.1}%)",
        report.frames,
        report.fused_dir.display(),
        report.stats.average.0,
        report.stats.average.1,
        report.stats.average.2
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_stats(args: StatsArgs) -> Result<ExitCode, Error> {
    use std::fmt::Write as _;
    let (rows, average) = pipeline::summarize_stats(&args.fused_dir)?;
    let mut table = String::new();
    let _ = writeln!(
        table,
        "{:<18} {:>11} {:>10} {:>8} {:>10}",
        "timestamp", "rgbd_only%", "sfm_only%", "fused%", "total"
    );
    for row in &rows {
        let _ = writeln!(
            table,
            "{:<18.6} {:>11.1} {:>10.1} {:>8.1} {:>10}",
            row.timestamp, row.rgbd_only_pct, row.sfm_only_pct, row.fused_pct, row.total_measured
        );
    }
    let _ = writeln!(
        table,
        "{:<18} {:>11.1} {:>10.1} {:>8.1}",
        "average", average.0, average.1, average.2
    );
    // tolerate a closed pipe (e.g. piping into head)
    use std::io::Write as _;
    match std::io::stdout().write_all(table.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::Io {
            file: "<stdout>".into(),
            source: e,
        }),
        _ => Ok(ExitCode::SUCCESS),
    }
}
