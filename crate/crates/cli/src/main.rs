//! `ttstream`: streaming tensor-train decompositions, Tucker conversions and
//! the TT-fADI Sylvester solver from the command line.
//!
//! Every flag falls back to a `TTSTREAM_*` environment variable; an explicit
//! flag wins over the environment, which wins over the default.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::report::{emit_error, Report};

#[derive(Parser, Debug)]
#[command(name = "ttstream", version, about = "Streaming tensor-train toolkit")]
struct Cli {
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true, env = "TTSTREAM_REPORT")]
    report: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decompose a generated or stored tensor into TT format.
    Decompose(DecomposeArgs),
    /// Convert between Tucker (TKF1) and TT (TTF1) files.
    Convert(ConvertArgs),
    /// Solve a 3D Sylvester equation with TT-fADI.
    SolveSylvester(SylvesterArgs),
    /// Print the header of a DTF1, TTF1 or TKF1 file.
    Info(InfoArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TensorKind {
    Hilbert,
    GaussianBumps,
    /// A DTF1 file given by `--input`.
    Dense,
    /// A TTF1 file given by `--input`, used as the reference tensor.
    Tt,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DrmArg {
    KhatriRao,
    Gaussian,
}

#[derive(Args, Debug)]
pub struct DecomposeArgs {
    #[arg(long, env = "TTSTREAM_METHOD")]
    pub method: String,
    #[arg(long, value_enum, env = "TTSTREAM_TENSOR")]
    pub tensor: TensorKind,
    /// Comma-separated mode sizes (generated tensors only).
    #[arg(long, value_delimiter = ',', env = "TTSTREAM_DIMS")]
    pub dims: Vec<usize>,
    #[arg(long, env = "TTSTREAM_INPUT")]
    pub input: Option<PathBuf>,
    /// Comma-separated `r_1..r_{d−1}`.
    #[arg(long, value_delimiter = ',', env = "TTSTREAM_RANKS")]
    pub ranks: Vec<usize>,
    /// Verification threshold; also the truncation tolerance of the SVD
    /// methods when no ranks are given.
    #[arg(long, env = "TTSTREAM_TOL")]
    pub tol: Option<f64>,
    #[arg(long, default_value_t = 5, env = "TTSTREAM_OVERSAMPLE")]
    pub oversample: usize,
    /// Comma-separated number of chunks per mode.
    #[arg(long, value_delimiter = ',', env = "TTSTREAM_PARTITION")]
    pub partition: Vec<usize>,
    #[arg(long, default_value_t = 1, env = "TTSTREAM_WORKERS")]
    pub workers: usize,
    #[arg(long, default_value_t = 0, env = "TTSTREAM_SEED")]
    pub seed: u64,
    /// 1-based middle core of PSTT2.
    #[arg(long, env = "TTSTREAM_MIDDLE")]
    pub middle: Option<usize>,
    #[arg(long, value_enum, default_value = "khatri-rao", env = "TTSTREAM_DRM")]
    pub drm: DrmArg,
    /// Largest block a worker may load, in scalars.
    #[arg(long, env = "TTSTREAM_BLOCK_BUDGET")]
    pub block_budget: Option<usize>,
    /// `auto`, `none`, `full` or `sample:N`.
    #[arg(long, default_value = "auto", env = "TTSTREAM_VERIFY")]
    pub verify: String,
    /// Number of Gaussian bumps.
    #[arg(long, default_value_t = 100, env = "TTSTREAM_BUMPS")]
    pub bumps: usize,
    #[arg(long, default_value_t = 10.0, env = "TTSTREAM_GAMMA")]
    pub gamma: f64,
    /// Seed of the generated data, independent of the sketching seed.
    #[arg(long, default_value_t = 0, env = "TTSTREAM_DATA_SEED")]
    pub data_seed: u64,
    /// TTF1 output path.
    #[arg(long, env = "TTSTREAM_OUTPUT")]
    pub output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Direction {
    Tucker2tt,
    Tt2tucker,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BasisArg {
    Svd,
    Cpqr,
}

#[derive(Args, Debug)]
pub struct ConvertArgs {
    #[arg(long, value_enum, env = "TTSTREAM_DIRECTION")]
    pub direction: Direction,
    #[arg(long, env = "TTSTREAM_INPUT")]
    pub input: PathBuf,
    #[arg(long, env = "TTSTREAM_OUTPUT")]
    pub output: PathBuf,
    #[arg(long, env = "TTSTREAM_TOL")]
    pub tol: Option<f64>,
    /// TT ranks for tucker2tt, Tucker ranks for tt2tucker.
    #[arg(long, value_delimiter = ',', env = "TTSTREAM_RANKS")]
    pub ranks: Vec<usize>,
    #[arg(long, value_enum, default_value = "svd", env = "TTSTREAM_BASIS")]
    pub basis: BasisArg,
}

#[derive(Args, Debug)]
pub struct SylvesterArgs {
    /// Problem description (JSON).
    #[arg(long, env = "TTSTREAM_PROBLEM")]
    pub problem: PathBuf,
    /// Overrides the tolerance in the problem file.
    #[arg(long, env = "TTSTREAM_EPS")]
    pub eps: Option<f64>,
    #[arg(long, env = "TTSTREAM_OUTPUT")]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct InfoArgs {
    pub path: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match &cli.command {
        Command::Decompose(_) => "decompose",
        Command::Convert(_) => "convert",
        Command::SolveSylvester(_) => "solve-sylvester",
        Command::Info(_) => "info",
    };
    let outcome = match &cli.command {
        Command::Decompose(a) => commands::decompose(a),
        Command::Convert(a) => commands::convert(a),
        Command::SolveSylvester(a) => commands::solve_sylvester(a),
        Command::Info(a) => commands::info(a),
    };
    match outcome.and_then(|r: Report| r.write(command, cli.report.as_deref()).map(|()| r.passed())) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            emit_error(command, &e);
            ExitCode::FAILURE
        }
    }
}
