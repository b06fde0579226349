use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "cosparse",
    version,
    about = "Cosparse signal recovery by analysis l1-minimization",
    arg_required_else_help = true
)]
pub struct Cli {
    /// Seed for every random draw; falls back to COSPARSE_SEED, then to a
    /// fresh random seed (always reported).
    #[arg(long, global = true, env = "COSPARSE_SEED", hide_env_values = true)]
    pub seed: Option<u64>,
    /// Output file (or directory for `signal` and `phase`).
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Suppress informational lines on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,
    /// Worker threads for Monte-Carlo and experiment loops.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a frame or check the bounds of one on disk.
    Frame(FrameArgs),
    /// Draw a cosparse signal and, optionally, Gaussian measurements of it.
    Signal(SignalArgs),
    /// Solve the analysis l1 program for given measurements.
    Solve(SolveArgs),
    /// Evaluate the measurement-count and error bounds.
    Bounds(BoundsArgs),
    /// Monte-Carlo Gaussian widths and escape frequencies.
    Width(WidthArgs),
    /// Try to falsify a null space property by sampling.
    Nsp(NspArgs),
    /// Run a phase-transition experiment.
    Phase(PhaseArgs),
}

#[derive(Debug, Args)]
pub struct FrameArgs {
    /// Generate a tight frame (the default when --ratio is absent).
    #[arg(long, conflicts_with_all = ["check", "ratio"])]
    pub tight: bool,
    /// Generate a frame with this bound ratio B/A.
    #[arg(long, conflicts_with = "check")]
    pub ratio: Option<f64>,
    #[arg(long, required_unless_present = "check")]
    pub p: Option<usize>,
    #[arg(long, required_unless_present = "check")]
    pub d: Option<usize>,
    /// Report the bounds of the frame stored in this CSV file.
    #[arg(long, value_name = "FILE")]
    pub check: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SignalArgs {
    #[arg(long, value_name = "FILE")]
    pub frame: PathBuf,
    /// Cosparsity (number of annihilating rows).
    #[arg(long, conflicts_with = "s", required_unless_present = "s")]
    pub l: Option<usize>,
    /// Analysis sparsity, s = p - l.
    #[arg(long)]
    pub s: Option<usize>,
    /// Also draw this many Gaussian measurements.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, default_value_t = 0.0, requires = "m")]
    pub eta: f64,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long, value_name = "FILE")]
    pub frame: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub matrix: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub y: PathBuf,
    /// Noise level; 0 solves the equality-constrained program.
    #[arg(long, default_value_t = 0.0)]
    pub eta: f64,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub tol_feas: Option<f64>,
    #[arg(long)]
    pub tol_gap: Option<f64>,
    #[arg(long)]
    pub step_ratio: Option<f64>,
    #[arg(long)]
    pub over_relaxation: Option<f64>,
    /// Disable active-set polishing.
    #[arg(long)]
    pub no_polish: bool,
    /// Write the per-check trace (iter, objective, feas_residual, gap) here.
    #[arg(long, value_name = "FILE")]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long = "A", default_value_t = 1.0)]
    pub a: f64,
    #[arg(long = "B", default_value_t = 1.0)]
    pub b: f64,
    #[arg(long)]
    pub s: usize,
    #[arg(long)]
    pub p: usize,
    #[arg(long, default_value_t = 0.02)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.9)]
    pub rho: f64,
    /// Noise robustness constant of the nonuniform noisy bound.
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    /// Robustness constant of the uniform robust bound (must exceed 1).
    #[arg(long, default_value_t = 2.0)]
    pub tau_robust: f64,
    #[arg(long, default_value_t = 0.0)]
    pub eta: f64,
    /// Best s-term approximation error sigma_s(omega x)_1 for the error bounds.
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WidthSet {
    /// Hull of s-sparse unit vectors.
    #[value(name = "D", alias = "d")]
    D,
    /// Descent cone of the l1 norm at a random sign pattern.
    Polar,
    /// Escape frequency of a finite set of descent directions.
    Escape,
    /// Second moment of soft thresholding.
    Soft,
}

#[derive(Debug, Args)]
pub struct WidthArgs {
    #[arg(long, value_enum)]
    pub set: WidthSet,
    #[arg(long)]
    pub p: usize,
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    /// Deviation parameter (escape, soft).
    #[arg(long, default_value_t = 2.0)]
    pub t: f64,
    /// Signal dimension (escape).
    #[arg(long)]
    pub d: Option<usize>,
    /// Measurements (escape).
    #[arg(long)]
    pub m: Option<usize>,
    /// Descent directions in the finite set (escape).
    #[arg(long, default_value_t = 20)]
    pub dirs: usize,
    /// Draws of the measurement matrix (escape).
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Variant {
    Plain,
    #[value(name = "l2_stable", alias = "l2-stable")]
    L2Stable,
    Robust,
}

#[derive(Debug, Args)]
pub struct NspArgs {
    #[arg(long, value_name = "FILE")]
    pub matrix: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub frame: PathBuf,
    #[arg(long)]
    pub s: usize,
    #[arg(long, default_value_t = 0.9)]
    pub rho: f64,
    #[arg(long, value_enum, default_value_t = Variant::Plain)]
    pub variant: Variant,
    #[arg(long, default_value_t = 500)]
    pub samples: usize,
    /// Measurement weight of the robust variant.
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
}

#[derive(Debug, Args)]
pub struct PhaseArgs {
    /// JSON experiment configuration; flags below override its fields.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Start from the full-size geometry (d = 200, p = 250).
    #[arg(long)]
    pub full: bool,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Frame bound ratio B/A (1 gives a tight frame).
    #[arg(long)]
    pub ratio: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub s_list: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub m_grid: Option<Vec<usize>>,
    #[arg(long)]
    pub eta: Option<f64>,
}
