use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "msfadv", version, about = "Adversarial 3D objects against LiDAR-camera fusion surrogates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the synthetic scenario, a traffic cone mesh and the default config.
    Synth {
        #[arg(long)]
        out: PathBuf,
    },
    /// Optimize an adversarial mesh; writes adv.obj, report.json, trace.csv.
    Attack(AttackArgs),
    /// Render a mesh into the scenario; writes pc_adv.bin, image_adv.ppm, bev_features.txt.
    Render {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fusion verdict at every pose of a poses file.
    Evaluate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        mesh: PathBuf,
        /// `x y yaw_deg` per line.
        #[arg(long)]
        poses: PathBuf,
        /// Mesh the detectors are calibrated on [default: --mesh].
        #[arg(long)]
        benign: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Gradient-free baselines.
    #[command(subcommand)]
    Baseline(Baseline),
    /// Detection and attack success rates under input-transformation defenses.
    Defense(DefenseArgs),
    /// Watertightness, self-intersection and curvature of a mesh.
    Printability {
        #[arg(long)]
        mesh: PathBuf,
    },
}

#[derive(Args, Debug)]
struct AttackArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Benign object mesh, object frame.
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    max_iters: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Baseline {
    /// Gaussian vertex noise.
    Gn {
        #[arg(long)]
        mesh: PathBuf,
        /// Standard deviation, meters.
        #[arg(long, default_value_t = 0.021)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also report the attack objective in this scenario.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Genetic search over bounded vertex offsets.
    Ga {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 50)]
        population: usize,
        #[arg(long, default_value_t = 40)]
        generations: usize,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum DefenseName {
    BitDepth,
    Median,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum TargetName {
    Camera,
    Lidar,
    Both,
}

#[derive(Args, Debug)]
struct DefenseArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Adversarial mesh.
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long)]
    benign: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    defense: Option<DefenseName>,
    /// Comma-separated parameter list for --defense.
    #[arg(long)]
    sweep: Option<String>,
    /// Single bit-depth setting, same as `--defense bit-depth --sweep N`.
    #[arg(long, conflicts_with_all = ["defense", "sweep", "kernel"])]
    bits: Option<u32>,
    /// Single median kernel, same as `--defense median --sweep K`.
    #[arg(long, conflicts_with_all = ["defense", "sweep"])]
    kernel: Option<u32>,
    #[arg(long, value_enum, default_value = "both")]
    target: TargetName,
    /// Directory for defense.csv; the table always goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Exit status: 0 success, 1 error, 2 completed without success.
enum Outcome {
    Success,
    Unsuccessful,
}

fn configure_threads() -> msfadv::Result<()> {
    let Ok(v) = std::env::var("MSFADV_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| msfadv::Error::InvalidArgument(format!("MSFADV_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| msfadv::Error::InvalidArgument(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match configure_threads().and_then(|_| commands::run(cli.command)) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::Unsuccessful) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
