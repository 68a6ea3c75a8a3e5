//! `featdistill`: one binary wiring the pipeline stages together — seeded
//! degradation of image corpora, toy corpus materialization, two-stage
//! expert training, ensemble inference, and robustness reporting.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
//! `FEATDISTILL_LOG` sets the log level (error|warn|info|debug|trace) and
//! nothing else; the default is `warn`.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use featdistill::distortion::PipelineMode;

/// Which phase a failure belongs to, which fixes the process exit code.
pub enum Phase {
    /// Bad flags or config contents: exit 2, before any compute starts.
    Config,
    /// The pipeline itself failed: exit 1.
    Run,
}

pub struct CmdError {
    pub phase: Phase,
    pub msg: String,
}

impl CmdError {
    pub fn config(msg: impl std::fmt::Display) -> Self {
        CmdError { phase: Phase::Config, msg: msg.to_string() }
    }

    pub fn run(msg: impl std::fmt::Display) -> Self {
        CmdError { phase: Phase::Run, msg: msg.to_string() }
    }
}

impl From<featdistill::Error> for CmdError {
    fn from(e: featdistill::Error) -> Self {
        CmdError::run(e)
    }
}

pub type CmdResult = Result<(), CmdError>;

#[derive(Parser)]
#[command(
    name = "featdistill",
    version,
    about = "Robustness-first detector pipeline for AI-generated images",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Apply seeded degradations to an image directory or manifest
    Distort(DistortArgs),
    /// Materialize a self-contained toy corpus from a config file
    Prepare(PrepareArgs),
    /// Train every configured expert (both stages) from a run config
    Train(TrainArgs),
    /// Score a manifest with a trained ensemble, writing a predictions CSV
    Infer(InferArgs),
    /// Join predictions with a manifest and write the robustness report
    Eval(EvalArgs),
}

#[derive(Args)]
pub struct DistortArgs {
    /// Directory of input images (.png/.jpg/.jpeg), processed in name order
    #[arg(long, required_unless_present = "manifest", conflicts_with = "manifest")]
    pub input: Option<PathBuf>,
    /// Manifest naming the inputs (paths relative to the manifest file); a
    /// degraded manifest is emitted next to the output images
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Output directory (created if missing)
    #[arg(long)]
    pub output: PathBuf,
    /// Operator pool: clean | official_only | extended_only | mixed_equal
    #[arg(long, default_value = "mixed_equal", value_parser = parse_mode)]
    pub mode: PipelineMode,
    /// Root seed; every output byte derives from it
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Degraded variants written per input image
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    /// Worker threads (0 = all cores); outputs are identical for any value
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Args)]
pub struct PrepareArgs {
    /// Corpus description (TOML)
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (created if missing)
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Run config (TOML): augmentation mode, hyperparameters, experts
    #[arg(long)]
    pub config: PathBuf,
    /// Training manifest; image and embedding paths resolve relative to it
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory for checkpoints, step logs, and ensemble.json
    #[arg(long)]
    pub output: PathBuf,
    /// Worker threads for batch construction (0 = all cores)
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Args)]
pub struct InferArgs {
    /// Ensemble description (ensemble.json, as written by `train`)
    #[arg(long)]
    pub config: PathBuf,
    /// Manifest of items to score; paths resolve relative to it
    #[arg(long)]
    pub manifest: PathBuf,
    /// Predictions CSV to write
    #[arg(long)]
    pub output: PathBuf,
    /// Feed flat placeholder images instead of reading pixels from disk
    /// (for embedding-backed corpora, whose extractors ignore pixels)
    #[arg(long)]
    pub synthetic_images: bool,
    /// Worker threads (0 = all cores); outputs are identical for any value
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Predictions CSV written by `infer`
    #[arg(long)]
    pub predictions: PathBuf,
    /// Manifest carrying labels and applied degradations
    #[arg(long)]
    pub manifest: PathBuf,
    /// Robustness report (JSON) to write
    #[arg(long)]
    pub report: PathBuf,
}

fn parse_mode(s: &str) -> Result<PipelineMode, String> {
    match s {
        "clean" => Ok(PipelineMode::Clean),
        "official_only" => Ok(PipelineMode::OfficialOnly),
        "extended_only" => Ok(PipelineMode::ExtendedOnly),
        "mixed_equal" => Ok(PipelineMode::MixedEqual),
        other => Err(format!(
            "unknown mode '{other}' (expected clean, official_only, extended_only, or mixed_equal)"
        )),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FEATDISTILL_LOG", "warn"))
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Distort(args) => commands::distort::run(&args),
        Command::Prepare(args) => commands::prepare::run(&args),
        Command::Train(args) => commands::train::run(&args),
        Command::Infer(args) => commands::infer::run(&args),
        Command::Eval(args) => commands::eval::run(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.msg);
            ExitCode::from(match e.phase {
                Phase::Config => 2,
                Phase::Run => 1,
            })
        }
    }
}
