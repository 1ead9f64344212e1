//! `rephoto`: evaluate reconstructions by rendering held-out views.
//!
//! Exit codes: 0 success, 2 invalid input or usage, 3 I/O failure,
//! 4 internal invariant violation.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::*;
use crate::config::{GlobalArgs, Settings};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] rephoto::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) if e.is_input_error() => 2,
            CliError::Core(rephoto::Error::Io { .. }) => 3,
            CliError::Core(_) => 4,
        }
    }
}

/// Virtual rephotography: render reconstructions from the poses of held-out
/// photos and score the renders against the photos.
#[derive(Debug, Parser)]
#[command(name = "rephoto", version, propagate_version = true)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Partition the views of a manifest into cross-validation folds
    Split(SplitArgs),
    /// Render rephotos and completeness masks for every view
    Rephoto(RephotoArgs),
    /// Score one photo against one rephoto
    Score(ScoreArgs),
    /// Cross-validated evaluation with JSON/CSV reports and error images
    Evaluate(EvaluateArgs),
    /// Boxplot statistics of a CSV column
    Stats(StatsArgs),
    /// Pearson correlation between two CSV columns
    Correlate(CorrelateArgs),
    /// Apply texture noise, geometry noise and simplification to a mesh
    Degrade(DegradeArgs),
    /// Project error images onto mesh vertices as a jet-colored PLY
    Project(ProjectArgs),
    /// Write the procedural demo scene with rendered photos
    Synth(SynthArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    let settings = Settings::resolve(&cli.global)?;
    if let Some(n) = settings.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| rephoto::Error::Invariant(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Split(a) => split(&a, &settings),
        Command::Rephoto(a) => rephoto_cmd(&a, &settings),
        Command::Score(a) => score(&a, &settings),
        Command::Evaluate(a) => evaluate(&a, &settings),
        Command::Stats(a) => stats(&a, &settings),
        Command::Correlate(a) => correlate(&a, &settings),
        Command::Degrade(a) => degrade(&a, &settings),
        Command::Project(a) => project(&a, &settings),
        Command::Synth(a) => synth(&a, &settings),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
