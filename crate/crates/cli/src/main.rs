//! `lidcam`: command-line front end for the calibration library.
//!
//! Exit codes: 0 on success (for `calibrate`, a converged solve), 2 when the
//! solver used its outer-step budget without converging, 1 on any input or
//! runtime error. Log verbosity comes from `LIDCAM_LOG` (default `warn`).

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "lidcam", version, about = "Targetless LiDAR-camera extrinsic calibration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the LiDAR→camera extrinsic from a scan and a target depth map.
    Calibrate(CalibrateArgs),
    /// Write a seeded dataset of decalibrated samples plus a manifest.
    Generate(GenerateArgs),
    /// Calibrate every sample of a manifest and summarize the errors.
    Evaluate(EvaluateArgs),
    /// Project a scan through a transform and paint it over an image.
    Render(RenderArgs),
    /// Convert a KITTI calibration file into a rig config.
    ConvertKittiCalib(ConvertArgs),
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Distance {
    Chamfer,
    Emd,
    Icp,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Gradient {
    Provided,
    Fd,
}

/// Solver flags shared by `calibrate` and `evaluate`.
#[derive(Args, Clone)]
pub struct SolverArgs {
    /// Maximum outer re-alignment steps.
    #[arg(long, default_value_t = 5)]
    pub outer_iters: usize,
    /// Point-cloud distance of the translation stage.
    #[arg(long, value_enum, default_value_t = Distance::Emd)]
    pub distance: Distance,
    /// Photometric weight of the rotation stage.
    #[arg(long)]
    pub alpha_ph: Option<f64>,
    /// Chamfer weight of the rotation stage; replaces the default ramp with a constant.
    #[arg(long)]
    pub beta_dist: Option<f64>,
    /// Gradient source for the distance terms.
    #[arg(long, value_enum, default_value_t = Gradient::Provided)]
    pub gradient: Gradient,
    /// Seed for working-set subsampling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args)]
pub struct CalibrateArgs {
    /// Rig config (intrinsics, optional reference extrinsic).
    #[arg(long)]
    pub config: PathBuf,
    /// LiDAR scan, 16-byte float32 records.
    #[arg(long)]
    pub cloud: PathBuf,
    /// Target depth map, 16-bit millimeter PNG.
    #[arg(long)]
    pub target_depth: PathBuf,
    /// Index-aligned corrected scan, required by `--distance icp`.
    #[arg(long)]
    pub corresponded: Option<PathBuf>,
    /// Initial estimate as a transform file; defaults to identity.
    #[arg(long)]
    pub initial: Option<PathBuf>,
    /// Where to write the estimated transform.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Where to write the per-step solver journal.
    #[arg(long)]
    pub journal: Option<PathBuf>,
    /// Directory for before/after overlay renders.
    #[arg(long)]
    pub render_dir: Option<PathBuf>,
    /// Background image for the overlays.
    #[arg(long)]
    pub image: Option<PathBuf>,
    /// Leave wall time out of the journal so reruns are byte-identical.
    #[arg(long)]
    pub no_timing: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Args)]
pub struct GenerateArgs {
    /// Output directory (created if missing).
    #[arg(long, short)]
    pub out_dir: PathBuf,
    /// Synthetic scene: ground_plane_boxes, corridor or random_clutter.
    #[arg(long, default_value = "ground_plane_boxes", conflicts_with = "cloud")]
    pub scene: String,
    /// Scene density, points per sample.
    #[arg(long, default_value_t = 5000)]
    pub density: usize,
    /// Seed of the synthetic scene.
    #[arg(long, default_value_t = 0)]
    pub scene_seed: u64,
    /// Real LiDAR scan to decalibrate instead of a synthetic scene; requires a
    /// `--config` with a reference extrinsic.
    #[arg(long, requires = "config")]
    pub cloud: Option<PathBuf>,
    /// Rig config; defaults to the built-in synthetic camera.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Decalibration seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    /// Per-axis rotation half-range, degrees.
    #[arg(long, default_value_t = 10.0)]
    pub rot_range_deg: f64,
    /// Per-axis translation half-range, meters.
    #[arg(long, default_value_t = 0.2)]
    pub trans_range_m: f64,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Where to write the metrics summary; stdout gets a readable report either way.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Directory for per-sample estimated transforms.
    #[arg(long)]
    pub transforms_dir: Option<PathBuf>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub cloud: PathBuf,
    /// Transform applied to the scan; defaults to identity.
    #[arg(long)]
    pub transform: Option<PathBuf>,
    /// Background image; black when absent.
    #[arg(long)]
    pub image: Option<PathBuf>,
    /// Depth mapped to the near end of the color ramp, meters.
    #[arg(long, default_value_t = 2.0)]
    pub near: f64,
    /// Depth mapped to the far end of the color ramp, meters.
    #[arg(long, default_value_t = 40.0)]
    pub far: f64,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct ConvertArgs {
    /// KITTI calibration text file (P2, R0_rect, Tr_velo_to_cam).
    #[arg(long)]
    pub calib: PathBuf,
    #[arg(long)]
    pub width: u32,
    #[arg(long)]
    pub height: u32,
    #[arg(long, short)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LIDCAM_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Calibrate(a) => commands::calibrate(&a),
        Command::Generate(a) => commands::generate(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Render(a) => commands::render(&a),
        Command::ConvertKittiCalib(a) => commands::convert_kitti(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
