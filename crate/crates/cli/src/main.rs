//! `ridgeline`: batch front end for the preprocessing chain, the pipeline
//! simulator and the block-size and quality experiments.
//!
//! Exit codes: 0 success, 1 simulator disagrees with the software path,
//! 2 unreadable input or width mismatch, 64 usage error.

mod commands;
mod files;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ridgeline::binarize::{FactorMode, Polarity};

pub const EXIT_MISMATCH: u8 = 1;
pub const EXIT_IO: u8 = 2;
pub const EXIT_USAGE: u8 = 64;

#[derive(Debug, Parser)]
#[command(
    name = "ridgeline",
    version,
    about = "Fingerprint binarization, dilation and thinning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Binarize, dilate and thin a PGM image.
    Process(ProcessArgs),
    /// Run the image through the cycle-level pipeline model.
    Simulate(SimulateArgs),
    /// Block-factor table for the candidate block sizes.
    Blocksize(BlocksizeArgs),
    /// Compare adaptive binarizations against a baseline.
    Metrics(MetricsArgs),
    /// Write a synthetic fingerprint or noise image.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockSizeArg {
    Fixed(usize),
    /// Chosen by the block factor.
    Auto,
}

fn parse_block_size(s: &str) -> Result<BlockSizeArg, String> {
    if s == "auto" {
        return Ok(BlockSizeArg::Auto);
    }
    s.parse::<usize>()
        .map(BlockSizeArg::Fixed)
        .map_err(|_| format!("expected a block size or \"auto\", got {s:?}"))
}

fn parse_polarity(s: &str) -> Result<Polarity, String> {
    s.parse().map_err(|e: ridgeline::Error| e.to_string())
}

fn parse_factor_mode(s: &str) -> Result<FactorMode, String> {
    s.parse().map_err(|e: ridgeline::Error| e.to_string())
}

/// `N:overlap`, e.g. `16:1`.
fn parse_config(s: &str) -> Result<(usize, usize), String> {
    let (n, o) = s
        .split_once(':')
        .ok_or_else(|| format!("expected BLOCK:OVERLAP, got {s:?}"))?;
    let n = n.parse().map_err(|_| format!("bad block size in {s:?}"))?;
    let o = o.parse().map_err(|_| format!("bad overlap in {s:?}"))?;
    Ok((n, o))
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_name = "PBM")]
    pub out_binarized: Option<PathBuf>,
    #[arg(long, value_name = "PBM")]
    pub out_dilated: Option<PathBuf>,
    #[arg(long, value_name = "PBM")]
    pub out_thinned: Option<PathBuf>,
    /// Manifest path; defaults to the first output with `.manifest` appended.
    #[arg(long, value_name = "PATH")]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProcessArgs {
    pub input: PathBuf,
    /// Block side in pixels, or `auto` to pick it with the block factor.
    #[arg(long, default_value = "16", value_parser = parse_block_size)]
    pub block_size: BlockSizeArg,
    #[arg(long, default_value_t = 1)]
    pub overlap: usize,
    #[arg(long, default_value = "dark", value_parser = parse_polarity)]
    pub polarity: Polarity,
    #[arg(long, default_value_t = ridgeline::morphology::DEFAULT_ITERATIONS)]
    pub iterations: usize,
    /// Block factor form used by `--block-size auto`.
    #[arg(long, default_value = "mul", value_parser = parse_factor_mode)]
    pub factor_mode: FactorMode,
    #[command(flatten)]
    pub outputs: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub input: PathBuf,
    #[arg(long, default_value_t = 512)]
    pub row_width: usize,
    #[arg(long, default_value_t = 16)]
    pub block_size: usize,
    #[arg(long, default_value_t = 1)]
    pub overlap: usize,
    #[arg(long, default_value = "dark", value_parser = parse_polarity)]
    pub polarity: Polarity,
    /// Thinning iterations, one super-stage each.
    #[arg(long, default_value_t = ridgeline::morphology::DEFAULT_ITERATIONS)]
    pub iterations: usize,
    /// Main clock for the wall-time estimate.
    #[arg(long, value_name = "MHZ")]
    pub clock_mhz: Option<f64>,
    /// Write the event log, one event per line.
    #[arg(long, value_name = "PATH")]
    pub trace: Option<PathBuf>,
    #[command(flatten)]
    pub outputs: OutputArgs,
}

#[derive(Debug, Args)]
pub struct BlocksizeArgs {
    pub input: PathBuf,
    /// Mode used for the selection line; both modes are always tabulated.
    #[arg(long, default_value = "mul", value_parser = parse_factor_mode)]
    pub factor_mode: FactorMode,
    #[arg(long, value_delimiter = ',', default_values_t = ridgeline::binarize::DEFAULT_BLOCK_CANDIDATES)]
    pub candidates: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Baseline {
    /// Global Otsu threshold.
    Otsu,
    /// Adaptive 16x16 blocks with one pixel of overlap.
    Adaptive,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    pub input: PathBuf,
    /// Adaptive configurations as BLOCK:OVERLAP; repeatable.
    #[arg(long = "config", value_parser = parse_config, default_values = ["16:0", "16:1"])]
    pub configs: Vec<(usize, usize)>,
    #[arg(long, value_enum, default_value_t = Baseline::Otsu)]
    pub baseline: Baseline,
    #[arg(long, default_value = "dark", value_parser = parse_polarity)]
    pub polarity: Polarity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SynthKind {
    Fingerprint,
    Noise,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    pub output: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 512)]
    pub width: usize,
    #[arg(long, default_value_t = 512)]
    pub height: usize,
    #[arg(long, value_enum, default_value_t = SynthKind::Fingerprint)]
    pub kind: SynthKind,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Process(a) => commands::process(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Blocksize(a) => commands::blocksize(a),
        Command::Metrics(a) => commands::metrics(a),
        Command::Synth(a) => commands::synth(a),
    };
    match result {
        Ok(outcome) => {
            print!("{}", outcome.stdout);
            ExitCode::from(outcome.code)
        }
        Err(e) => {
            eprintln!("ridgeline: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
