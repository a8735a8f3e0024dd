//! `polarhe`: batch entry point for decomposition, slide preparation and the
//! decoupled-representation experiments.

mod ablate;
mod decompose;
mod manifest;
mod metrics;
mod pipeline;
mod train;

use std::fmt;
use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Exit codes.
const EXIT_USAGE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "polarhe", version, about = "Polarimetric decomposition, slide preparation and decoupled pretraining")]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true, env = "POLARHE_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON config file, or the run manifest of an earlier run to repeat it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory receiving every output.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config's base RNG seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Per-pixel retardance, fast axis and depolarization of a Mueller image (PMM).
    Decompose(decompose::DecomposeArgs),
    /// Flat-field, register, resample, mask and cut aligned patches.
    Pipeline(pipeline::PipelineArgs),
    /// Train both branches on the synthetic paired dataset.
    Train(train::TrainArgs),
    /// Linear probe of a saved (or freshly initialized) H&E encoder.
    Probe(train::ProbeArgs),
    /// Loss-component and common-ratio ablation grid.
    Ablate(ablate::AblateArgs),
    /// Decoupling metrics of two saved embedding batches.
    Metrics(metrics::MetricsArgs),
}

/// A problem with how the tool was invoked or configured.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<polarhe::Error>() {
            return match e {
                polarhe::Error::InvalidArgument(_) => EXIT_USAGE,
                polarhe::Error::Format(_) | polarhe::Error::Io(_) | polarhe::Error::Json(_) => EXIT_INPUT,
                polarhe::Error::Decomposition(_) | polarhe::Error::Registration { .. } | polarhe::Error::NonFiniteLoss { .. } => {
                    EXIT_NUMERIC
                }
            };
        }
        if cause.is::<serde_json::Error>() || cause.is::<io::Error>() {
            return EXIT_INPUT;
        }
    }
    EXIT_USAGE
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(UsageError("--threads must be >= 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Decompose(args) => decompose::run(args),
        Command::Pipeline(args) => pipeline::run(args),
        Command::Train(args) => train::run_train(args),
        Command::Probe(args) => train::run_probe(args),
        Command::Ablate(args) => ablate::run(args),
        Command::Metrics(args) => metrics::run(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
