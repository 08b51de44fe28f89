//! `o2s`: panorama to cubemap, Gaussian scaffold, rendering and evaluation.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "o2s", version, about = "Panorama to Gaussian scaffold toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Project an equirect panorama onto six perspective faces.
    Pano2cube(Pano2Cube),
    /// Resample six faces back into an equirect panorama.
    Cube2pano(Cube2Pano),
    /// Lift a panorama and its depth map into a Gaussian scaffold.
    Scaffold(ScaffoldArgs),
    /// Render a scaffold along a trajectory.
    Render(RenderArgs),
    /// Score predicted depth maps against ground truth.
    EvalDepth(EvalDepth),
    /// Score an estimated camera trajectory against ground truth.
    EvalTraj(EvalTraj),
    /// Write a synthetic panorama with analytic depth.
    Synth(Synth),
    /// Cross-face fusion through the equirect domain.
    Fuse(Fuse),
    /// Trajectory helpers.
    Traj {
        #[command(subcommand)]
        command: TrajCommand,
    },
}

#[derive(Debug, Subcommand)]
enum TrajCommand {
    /// Generate one of the evaluation camera motions.
    Make(TrajMake),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Bits {
    #[value(name = "8")]
    Eight,
    #[value(name = "16")]
    Sixteen,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FaceFileFormat {
    Png,
    Pfm,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DepthKind {
    /// Euclidean distance along the viewing ray.
    Ray,
    /// Distance along each face's optical axis.
    Z,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Align {
    None,
    Sim3,
}

#[derive(Clone, Copy, Debug, PartialEq, ValueEnum)]
enum SceneKind {
    Room,
    Gradient,
    Sphere,
}

#[derive(Debug, Args)]
struct Pano2Cube {
    /// 2:1 panorama (.png or .pfm).
    #[arg(long)]
    input: PathBuf,
    /// Face edge in pixels [default: panorama width / 2].
    #[arg(long)]
    face_size: Option<usize>,
    /// Field of view per face, degrees.
    #[arg(long, default_value_t = 95.0)]
    fov: f64,
    #[arg(long, value_enum, default_value_t = FaceFileFormat::Png)]
    format: FaceFileFormat,
    /// PNG sample depth.
    #[arg(long, value_enum, default_value_t = Bits::Eight)]
    bits: Bits,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct Cube2Pano {
    /// Directory with the six faces and cubemap.json.
    #[arg(long)]
    faces: PathBuf,
    /// Output width in pixels (even); height is width / 2.
    #[arg(long, default_value_t = 1024)]
    width: usize,
    /// Field of view override when cubemap.json is missing.
    #[arg(long)]
    fov: Option<f64>,
    #[arg(long, value_enum, default_value_t = Bits::Eight)]
    bits: Bits,
    /// Output panorama (.png or .pfm).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ScaffoldArgs {
    /// Colour panorama (.png or .pfm).
    #[arg(long)]
    pano: PathBuf,
    /// Depth panorama (.pfm), metres.
    #[arg(long)]
    depth: PathBuf,
    /// Face edge in pixels [default: panorama width / 2].
    #[arg(long)]
    face_size: Option<usize>,
    #[arg(long, default_value_t = 95.0)]
    fov: f64,
    #[arg(long, default_value_t = 0.8)]
    opacity: f64,
    #[arg(long, default_value_t = 1.0)]
    scale_mult: f64,
    /// What the depth values measure.
    #[arg(long, value_enum, default_value_t = DepthKind::Ray)]
    depth_kind: DepthKind,
    #[arg(long)]
    out: PathBuf,
    /// Also export a splat PLY.
    #[arg(long)]
    ply: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RenderArgs {
    #[arg(long)]
    scaffold: PathBuf,
    #[arg(long)]
    traj: PathBuf,
    /// Output width [default: trajectory intrinsics].
    #[arg(long)]
    width: Option<usize>,
    /// Output height [default: trajectory intrinsics].
    #[arg(long)]
    height: Option<usize>,
    #[arg(long, value_enum, default_value_t = Bits::Eight)]
    bits: Bits,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalDepth {
    /// Predicted depth: a .pfm file or a directory of them.
    #[arg(long)]
    pred: PathBuf,
    /// Ground truth, matched to predictions by file name.
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    min: f64,
    #[arg(long, default_value_t = 10.0)]
    max: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Also write the report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalTraj {
    #[arg(long)]
    est: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Keep every k-th frame before scoring.
    #[arg(long, default_value_t = 10)]
    every: usize,
    #[arg(long, value_enum, default_value_t = Align::None)]
    align: Align,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Synth {
    #[arg(value_enum)]
    scene: SceneKind,
    /// Panorama width in pixels (even).
    #[arg(long, default_value_t = 1024)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sphere radius in metres.
    #[arg(long, default_value_t = 2.0)]
    radius: f64,
    #[arg(long, value_enum, default_value_t = Bits::Sixteen)]
    bits: Bits,
    /// Output directory for pano.png and depth.pfm.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct Fuse {
    #[arg(long)]
    faces: PathBuf,
    /// zero, identity, gaussian<N> or box<N>.
    #[arg(long, default_value = "gaussian5")]
    kernel: String,
    /// Latent panorama width [default: 4 x face size].
    #[arg(long)]
    latent_width: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrajMake {
    /// forward, backward, left, right, orbit or lemniscate.
    #[arg(long)]
    motion: String,
    #[arg(long, default_value_t = 30)]
    frames: usize,
    /// Distance travelled, orbit radius or lemniscate half-width, metres.
    #[arg(long, default_value_t = 1.0)]
    extent: f64,
    #[arg(long, default_value_t = 512)]
    width: usize,
    #[arg(long, default_value_t = 512)]
    height: usize,
    /// Horizontal field of view, degrees.
    #[arg(long, default_value_t = 90.0)]
    fov: f64,
    #[arg(long)]
    out: PathBuf,
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(v) = std::env::var("O2S_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| panoscaffold::Error::InvalidArgument(format!("O2S_THREADS must be a count, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn exit_code(e: &anyhow::Error) -> u8 {
    let validation = e
        .chain()
        .find_map(|c| c.downcast_ref::<panoscaffold::Error>())
        .is_some_and(|e| e.is_validation());
    if validation {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| {
        eprintln!("o2s config: {:?}", cli.command);
        commands::run(cli.command)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
