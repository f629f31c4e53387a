//! `crackscope`: crack width reports, detection evaluation, dataset splits
//! and gradient verification from the command line.
//!
//! Exit codes: 0 on success, 1 when an input fails validation, 2 on a usage
//! error. Every failure prints exactly one line starting with `error:` to
//! stderr.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::output::CliError;

#[derive(Debug, Parser)]
#[command(name = "crackscope", version, about = "Pavement crack inspection toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Width report for every crack component of a binary PGM mask.
    Analyze(AnalyzeArgs),
    /// Score predictions against a directory of polygon labels.
    Eval(EvalArgs),
    /// Seeded train/val/test split of a file list.
    Split(SplitArgs),
    /// Finite-difference check of every kernel and block.
    Gradcheck(GradcheckArgs),
    /// Run one attention block on random input and check its zero-init identity.
    AttnDemo(DemoArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Border {
    Background,
    Ignore,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Input mask (binary P5 PGM). Repeat for several masks.
    #[arg(long, required = true)]
    mask: Vec<PathBuf>,
    /// Report file for a single mask, or directory for several; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    scale_mm_per_px: Option<f64>,
    /// Gray level at or above which a pixel is crack.
    #[arg(long, default_value_t = 128)]
    threshold: u8,
    /// How the image frame is treated by the distance transform.
    #[arg(long, value_enum, default_value_t = Border::Background)]
    border: Border,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EvalMode {
    Instance,
    Pixel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MatchGeometry {
    Box,
    Mask,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Directory of `<id>.txt` label files, optionally with `<id>.pgm` for the extent.
    #[arg(long)]
    gt: PathBuf,
    /// JSON-lines predictions.
    #[arg(long)]
    pred: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    iou: f64,
    #[arg(long, value_enum, default_value_t = EvalMode::Instance)]
    mode: EvalMode,
    /// Geometry compared in instance mode.
    #[arg(long = "match", value_enum, default_value_t = MatchGeometry::Box)]
    match_geometry: MatchGeometry,
    /// Metrics JSON; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// PR curve CSV (instance mode only).
    #[arg(long)]
    pr_out: Option<PathBuf>,
    /// Raster extent for labels without a PGM.
    #[arg(long, default_value_t = 640)]
    width: usize,
    #[arg(long, default_value_t = 640)]
    height: usize,
}

#[derive(Debug, Args)]
struct SplitArgs {
    /// File list, one item per line.
    #[arg(long)]
    list: PathBuf,
    #[arg(long)]
    train: usize,
    #[arg(long)]
    val: usize,
    #[arg(long)]
    test: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory receiving train.txt, val.txt and test.txt.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-5)]
    eps: f64,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    /// Random cases per target.
    #[arg(long, default_value_t = 100)]
    cases: usize,
    /// Restrict to these targets (repeatable).
    #[arg(long)]
    target: Vec<String>,
    /// JSON report.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Block {
    Eca,
    Cam,
    Sam,
    Cbam,
    Sppf,
    Pipeline,
}

#[derive(Debug, Args)]
struct DemoArgs {
    #[arg(long, value_enum)]
    block: Block,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 16)]
    channels: usize,
    /// Height and width of the random input.
    #[arg(long, default_value_t = 8)]
    size: usize,
    /// Write the random parameters in the plain-text parameter format.
    #[arg(long)]
    params_out: Option<PathBuf>,
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let threads = match std::env::var("CRACKSCOPE_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Validation(format!("CRACKSCOPE_THREADS must be a positive integer, got `{v}`")))?,
        Err(_) => 1,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Validation(format!("cannot start {threads} worker threads: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let pool = thread_pool()?;
    pool.install(|| match cli.command {
        Command::Analyze(a) => commands::analyze(a),
        Command::Eval(a) => commands::eval(a),
        Command::Split(a) => commands::split(a),
        Command::Gradcheck(a) => commands::gradcheck(a),
        Command::AttnDemo(a) => commands::attn_demo(a),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.render().to_string();
            let first = rendered.lines().next().unwrap_or("error: invalid usage");
            return CliError::Usage(first.trim_start_matches("error: ").to_string()).report();
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.report(),
    }
}
