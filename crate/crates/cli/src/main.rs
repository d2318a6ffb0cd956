use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod target;

/// Bad input: missing files, malformed formats, invalid flags. Exits with 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser)]
#[command(name = "convexfit", version, about = "Fit unions of smooth convex polytopes and extract exact meshes")]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// More logging (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a decomposition to a target solid.
    Fit(FitArgs),
    /// Extract exact meshes (OBJ) or polygons (SVG) from a decomposition.
    Extract(ExtractArgs),
    /// Compare a decomposition against a target (IoU, Chamfer-L1, F-score).
    Eval(EvalArgs),
    /// Marching-cubes mesh of a decomposition or target, for comparison.
    Mc(McArgs),
    /// Dump training samples of a target, or rasterize it to PGM/CVXG.
    Sample(SampleArgs),
}

#[derive(Args)]
pub struct FitArgs {
    /// Target solid: .csg, .obj, .pgm or .cvxg.
    #[arg(long)]
    pub target: PathBuf,
    /// Output decomposition JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Line-delimited fit report (default: next to --out with .report.jsonl).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Base configuration as JSON; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub h: Option<usize>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub batch_volume: Option<usize>,
    #[arg(long)]
    pub batch_surface: Option<usize>,
    #[arg(long)]
    pub bank_volume: Option<usize>,
    #[arg(long)]
    pub bank_surface: Option<usize>,
    #[arg(long)]
    pub w_approx: Option<f64>,
    #[arg(long)]
    pub w_decomp: Option<f64>,
    #[arg(long)]
    pub w_unique: Option<f64>,
    #[arg(long)]
    pub w_guide: Option<f64>,
    #[arg(long)]
    pub w_loc: Option<f64>,
    #[arg(long)]
    pub w_merged: Option<f64>,
    /// Replace the guide and localization losses with the merged loss.
    #[arg(long)]
    pub merged: bool,
    /// Keep every convex's smoothness at its initial value.
    #[arg(long)]
    pub freeze_delta: bool,
    /// Use LogSumExp without the 1/delta factor.
    #[arg(long)]
    pub literal_lse: bool,
    #[arg(long)]
    pub log_every: Option<usize>,
    #[arg(long)]
    pub eval_every: Option<usize>,
    #[arg(long)]
    pub eval_samples: Option<usize>,
}

#[derive(Args)]
pub struct ExtractArgs {
    /// Decomposition JSON.
    #[arg(long)]
    pub input: PathBuf,
    /// Union mesh (.obj) for 3D, or polygons (.svg) for 2D.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory receiving one file per kept convex.
    #[arg(long)]
    pub per_convex: Option<PathBuf>,
    /// Convexes with smaller volume (area in 2D) are skipped.
    #[arg(long, default_value_t = 1e-9)]
    pub prune_eps: f64,
    /// Run extraction this many times and report the median time.
    #[arg(long, default_value_t = 1)]
    pub repeat: usize,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Decomposition JSON.
    #[arg(long)]
    pub input: PathBuf,
    /// Target solid: .csg, .obj, .pgm or .cvxg.
    #[arg(long)]
    pub target: PathBuf,
    /// Write the report as JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = convexfit::metrics::DEFAULT_IOU_SAMPLES)]
    pub iou_samples: usize,
    #[arg(long, default_value_t = convexfit::metrics::DEFAULT_SURFACE_SAMPLES)]
    pub surface_samples: usize,
    /// F-score distance threshold (default: 1% of the target bbox diagonal).
    #[arg(long)]
    pub f_threshold: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-9)]
    pub prune_eps: f64,
}

#[derive(Args)]
pub struct McArgs {
    /// Decomposition JSON (meshes its union indicator at 0.5).
    #[arg(long, conflicts_with = "target", required_unless_present = "target")]
    pub input: Option<PathBuf>,
    /// Analytic or sampled target instead of a decomposition.
    #[arg(long)]
    pub target: Option<PathBuf>,
    /// Cells per axis.
    #[arg(long, default_value_t = 64)]
    pub res: usize,
    /// Mesh the hard polytope distance at 0 instead of the indicator.
    #[arg(long)]
    pub hard: bool,
    /// Grid bounds `xmin ymin zmin xmax ymax zmax`.
    #[arg(long, num_args = 6, allow_negative_numbers = true)]
    pub bbox: Option<Vec<f64>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub target: PathBuf,
    /// Samples file (.txt), or a .pgm/.cvxg raster when --grid is given.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    pub n_volume: usize,
    #[arg(long, default_value_t = 10_000)]
    pub n_surface: usize,
    /// Near-surface jitter std (default: 0.5% of the bbox diagonal).
    #[arg(long)]
    pub jitter: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Rasterize to a grid with this many cells per axis instead.
    #[arg(long)]
    pub grid: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "error",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Fit(a) => commands::fit(&a),
        Command::Extract(a) => commands::extract(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Mc(a) => commands::mc(&a),
        Command::Sample(a) => commands::sample(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    use convexfit::Error as E;
    for cause in e.chain() {
        if cause.is::<UsageError>() {
            return 2;
        }
        if let Some(err) = cause.downcast_ref::<E>() {
            return match err {
                E::InvalidArgument(_)
                | E::Parse { .. }
                | E::Io { .. }
                | E::Json(_)
                | E::DimensionMismatch { .. }
                | E::NotWatertight(_)
                | E::TooFewInterior { .. } => 2,
                _ => 1,
            };
        }
    }
    1
}
