use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "canalbank",
    version,
    about = "Canal bank-effect model: data, identification, attribution, simulation"
)]
pub struct Cli {
    /// Worker threads for sweep points and Shapley coalitions.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,

    /// Where to write the run manifest (default: next to the main output).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a captive-test dataset from known coefficients.
    Datagen(DatagenArgs),
    /// Identify the model coefficients from a captive-test dataset.
    Identify(IdentifyArgs),
    /// Attribute validation accuracy to candidate functions.
    Shapley(ShapleyArgs),
    /// Simulate one free-running transit.
    Simulate(SimulateArgs),
    /// Simulate transits over a range of initial offsets.
    Sweep(SweepArgs),
    /// Re-run the command recorded in a manifest.
    Replay { manifest_path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioKind {
    /// Harmonic heading oscillation at a fixed offset.
    Yaw,
    /// Harmonic lateral oscillation at zero heading.
    Sway,
    /// The three-test program (two yaw tests, one sway test).
    Program,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Geometry file (`key = value`); the model-scale DTC in a 7 m canal if omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DatagenArgs {
    #[arg(long, value_enum)]
    pub scenario: ScenarioKind,
    /// Heading amplitude (rad) for yaw, lateral amplitude (m) for sway.
    #[arg(long, default_value_t = 0.2)]
    pub amplitude: f64,
    #[arg(long, default_value_t = 20.0)]
    pub period: f64,
    /// Mean lateral position (m).
    #[arg(long, default_value_t = 0.0)]
    pub offset: f64,
    #[arg(long, default_value_t = 1.0)]
    pub u0: f64,
    #[arg(long, default_value_t = 60.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 0.05)]
    pub dt: f64,
    /// Gaussian noise as a fraction of each force channel's RMS.
    #[arg(long, conflicts_with = "noise_std")]
    pub noise: Option<f64>,
    /// Absolute Gaussian noise on X, Y, N.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    pub noise_std: Option<Vec<f64>>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Coefficients generating the forces; reference DTC values if omitted.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
}

#[derive(Debug, Args)]
pub struct IdentifyArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Report the maximum relative error against these coefficients.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BlockChoice {
    X,
    Y,
    N,
    All,
}

#[derive(Debug, Args)]
pub struct ShapleyArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Coefficients document from `identify`; its split seed and fraction are reused.
    #[arg(long)]
    pub coeffs: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub split_seed: Option<u64>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long, value_enum, ignore_case = true, default_value = "all")]
    pub block: BlockChoice,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[arg(long)]
    pub coeffs: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    #[arg(long, default_value_t = 600.0)]
    pub t_max: f64,
    /// Constant surge force (N).
    #[arg(long, default_value_t = 12.6)]
    pub x_in: f64,
    #[arg(long, default_value_t = 1.0)]
    pub u0: f64,
    /// Surge inertia (kg); the vessel mass if omitted.
    #[arg(long)]
    pub surge_mass: Option<f64>,
    /// Stop when a midship clearance falls below this (m); 5% of the beam if omitted.
    #[arg(long)]
    pub clearance_floor: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long, allow_hyphen_values = true)]
    pub y0: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub psi0: f64,
    /// Trajectory CSV.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Outcome JSON (default: the trajectory path with a `.json` extension).
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    /// Initial offsets as `start:stop:step`, stop included.
    #[arg(long, allow_hyphen_values = true)]
    pub y0_range: String,
    #[arg(long, short)]
    pub out: PathBuf,
    /// Side-flip summary JSON (default: the sweep path with a `.json` extension).
    #[arg(long)]
    pub summary: Option<PathBuf>,
}
