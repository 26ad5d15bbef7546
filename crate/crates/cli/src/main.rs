//! Command-line front end: tradeoff curves, compressor search, scheme tools and
//! figure data. Every command that writes to `--out` also writes a manifest.

mod commands;
mod io;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "lwpir", version, about = "Rate, distortion and leakage tradeoffs for lossy weakly-private information retrieval")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// LP over a pool of response functions for finite M and β.
    TradeoffExact(TradeoffExactArgs),
    /// Infinite-file-size optimum on a rate-distortion curve.
    TradeoffAsymptotic(TradeoffAsymptoticArgs),
    /// Optimal mixtures of one-file compressors across M files.
    TradeoffCompressors(TradeoffCompressorsArgs),
    /// Simulated-annealing search for balanced lossy compressors.
    CompressorSearch(CompressorSearchArgs),
    /// Random-coding distortion bound for β-bit blocks.
    KvBound(KvBoundArgs),
    /// Exact rate, distortion and leakage of a scheme file.
    SchemeEval(SchemeEvalArgs),
    /// Monte Carlo estimate of a scheme's rate, distortion and leakage.
    SchemeSimulate(SchemeSimulateArgs),
    /// Build a new scheme from existing ones.
    SchemeCompose(SchemeComposeArgs),
    /// Curve data for the figures.
    Figure(FigureArgs),
    /// Long-running vertex enumeration over all partitions, with checkpoints.
    Enumerate(EnumerateArgs),
}

#[derive(Args, Debug, Serialize)]
struct TradeoffExactArgs {
    #[arg(long)]
    files: usize,
    #[arg(long)]
    beta: usize,
    #[arg(long, default_value_t = 2)]
    alphabet: u32,
    /// Comma-separated leakage targets, e.g. "1/2,3/4,1".
    #[arg(long)]
    leakage: String,
    /// "start:end:count" or a comma-separated list; exact fractions allowed.
    #[arg(long, default_value = "0:1/2:21")]
    distortion_grid: String,
    /// "enumerate", "catalog", or a pool JSON file.
    #[arg(long, default_value = "enumerate")]
    pool: String,
    /// Solve in exact rational arithmetic.
    #[arg(long)]
    exact_rational: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct TradeoffAsymptoticArgs {
    #[arg(long)]
    files: usize,
    #[arg(long)]
    leakage: String,
    /// "binary" or "kary:K".
    #[arg(long, default_value = "binary")]
    curve: String,
    #[arg(long, value_enum, default_value_t = AsymptoticMethod::Symmetric)]
    method: AsymptoticMethod,
    /// Breakpoints of the piecewise-linear approximation.
    #[arg(long, default_value_t = 201)]
    pwl_points: usize,
    #[arg(long, default_value = "0:1/2:51")]
    distortion_grid: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
enum AsymptoticMethod {
    /// Symmetric subset family LP (any M).
    Symmetric,
    /// Full distortion-profile LP (s^M profiles, small M).
    Profile,
}

#[derive(Args, Debug, Serialize)]
struct TradeoffCompressorsArgs {
    #[arg(long)]
    files: usize,
    #[arg(long)]
    leakage: String,
    /// Compressor JSON files (lists of compressors); "catalog" for the built-in 4-bit set.
    #[arg(long, num_args = 1.., default_value = "catalog")]
    pool: Vec<String>,
    #[arg(long, default_value = "0:1/2:51")]
    distortion_grid: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct CompressorSearchArgs {
    #[arg(long)]
    beta: usize,
    /// Comma-separated per-symbol rates; β·R must be an integer.
    #[arg(long)]
    rate: String,
    #[arg(long, default_value_t = 1_000_000)]
    iters: u64,
    #[arg(long, default_value_t = 32)]
    restarts: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Compressor list written here (JSON); existing entries are kept and reused.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct KvBoundArgs {
    #[arg(long)]
    beta: usize,
    /// Comma-separated rates, or "start:end:count".
    #[arg(long)]
    rate: String,
    /// Subset size N of the subset-request scheme (rates scale by N, leakage 1/N).
    #[arg(long, default_value_t = 1)]
    subset: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct SchemeEvalArgs {
    scheme: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct SchemeSimulateArgs {
    scheme: PathBuf,
    #[arg(long, default_value_t = 1_000_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Serialize)]
struct SchemeComposeArgs {
    #[command(subcommand)]
    op: ComposeOp,
    /// Output scheme file (the manifest is written beside it).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ComposeOp {
    /// Split files into blocks answered separately, optionally coded jointly.
    Block {
        scheme: PathBuf,
        #[arg(long)]
        blocks: usize,
        #[arg(long)]
        joint: bool,
        #[arg(long, default_value_t = lwpir::scheme::DEFAULT_JOINT_CAP)]
        cap: u64,
    },
    /// Hidden file groups: M = G·M₀, leakage divided by G.
    Subset {
        scheme: PathBuf,
        #[arg(long)]
        groups: usize,
        /// Total file count when the last group is partial (dummy zero files).
        #[arg(long)]
        pad_to: Option<usize>,
    },
    /// Revealed file groups: M = G·M₀, leakage unchanged.
    Select {
        scheme: PathBuf,
        #[arg(long)]
        groups: usize,
    },
    /// Mixture of schemes with the given weights.
    Timeshare {
        #[arg(required = true)]
        schemes: Vec<PathBuf>,
        /// Comma-separated weights summing to 1.
        #[arg(long)]
        weights: String,
    },
    /// Equalize per-file distortions over file relabelings.
    Symmetrize { scheme: PathBuf },
}

#[derive(Args, Debug, Serialize)]
struct FigureArgs {
    #[arg(value_enum)]
    which: Figure,
    #[arg(long)]
    out: PathBuf,
    /// Compressor JSON for the second figure (from compressor-search).
    #[arg(long)]
    pool: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    alphabet: u32,
    #[arg(long, default_value_t = 16)]
    files: usize,
    #[arg(long, default_value_t = 20)]
    beta: usize,
    #[arg(long, default_value_t = 201)]
    points: usize,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum Figure {
    Fig1,
    Fig2,
}

#[derive(Args, Debug, Serialize)]
struct EnumerateArgs {
    #[arg(long)]
    files: usize,
    #[arg(long)]
    beta: usize,
    #[arg(long, default_value_t = 2)]
    alphabet: u32,
    /// Restrict to canonical partitions under bit, file and complement symmetries.
    #[arg(long)]
    symmetric: bool,
    /// Length of the restricted-growth prefixes used as work units.
    #[arg(long, default_value_t = 6)]
    prefix_len: usize,
    /// Checkpoint file; resumed when it exists.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Vertex points written here (pool JSON) when done.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    commands::run(&cli.command)
}
