//! `outrel`: discover statistically meaningful relationships between
//! aligned outliers in temporal attribute series.
//!
//! Exit codes: 0 on success, 1 for usage or configuration errors, 2 for
//! data errors. Diagnostics go to stderr as single-line JSON.

mod commands;
mod config;
mod scorefile;

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use outrel_core::pipeline::PipelineError;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError::Usage(message.into())
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError::Data(message.into())
    }

    pub fn from_pipeline(e: PipelineError) -> Self {
        match e {
            PipelineError::Param(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Data(_) => "data",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) => m,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message())
    }
}

impl std::error::Error for CliError {}

#[derive(Parser)]
#[command(
    name = "outrel",
    version,
    about = "Discover meaningful relationships between aligned outliers in temporal data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score attributes into initial, cumulative, and dominant score files.
    Score(ScoreArgs),
    /// Build the alignment index over score files and report pruning.
    Index(IndexArgs),
    /// Run the full discovery pipeline and emit a run report.
    Discover(DiscoverArgs),
    /// Evaluate a run report against labeled pairs.
    Eval(EvalArgs),
    /// Time the pair phase with and without the alignment index.
    Bench(BenchArgs),
    /// Export one pair's aligned scores, outlier flags, and weights.
    ExportScatter(ExportScatterArgs),
}

#[derive(Args)]
pub struct ScoreArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Where score files land; defaults to `<output.dir>/scores`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Window sizes, overriding the configured list. Repeatable.
    #[arg(long)]
    phi: Vec<usize>,
    /// Cumulative-score decay, overriding the configured value.
    #[arg(long)]
    lambda: Option<f64>,
    /// Positive outlier threshold override.
    #[arg(long)]
    theta_pos: Option<f64>,
    /// Negative outlier threshold override.
    #[arg(long)]
    theta_neg: Option<f64>,
}

#[derive(Args)]
pub struct IndexArgs {
    /// Score files or directories containing them.
    #[arg(long, required = true, num_args = 1..)]
    scores: Vec<PathBuf>,
    /// Snapshot destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Pair exclusion policy: same_attribute or none.
    #[arg(long, default_value = "same_attribute")]
    exclusion: String,
}

#[derive(Args)]
pub struct DiscoverArgs {
    #[arg(long)]
    config: PathBuf,
    /// Report destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct EvalArgs {
    /// A run report produced by `discover`.
    #[arg(long)]
    records: PathBuf,
    /// Delimited labels: pair_a, pair_b, positive|negative (header row).
    #[arg(long)]
    labels: PathBuf,
    /// Metrics destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct BenchArgs {
    #[arg(long)]
    config: PathBuf,
    /// Timing report destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ExportScatterArgs {
    #[arg(long)]
    config: PathBuf,
    /// First representation id (attribute@window).
    #[arg(long)]
    rep_a: String,
    /// Second representation id (attribute@window).
    #[arg(long)]
    rep_b: String,
    /// Table destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let diag = serde_json::json!({
                    "error": "usage",
                    "message": e.to_string(),
                });
                eprintln!("{diag}");
                std::process::exit(1);
            }
            // --help and --version print to stdout and succeed.
            print!("{e}");
            std::process::exit(0);
        }
    };

    let result = match &cli.command {
        Command::Score(args) => commands::score(args),
        Command::Index(args) => commands::index(args),
        Command::Discover(args) => commands::discover(args),
        Command::Eval(args) => commands::eval(args),
        Command::Bench(args) => commands::bench(args),
        Command::ExportScatter(args) => commands::scatter(args),
    };

    if let Err(e) = result {
        let diag = serde_json::json!({
            "error": e.kind(),
            "message": e.message(),
        });
        eprintln!("{diag}");
        std::process::exit(e.exit_code());
    }
}
