mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use texfuse::Error;

use config::RunConfig;

/// Texture descriptors, SVM ensembles and score fusion over a class-per-folder
/// image dataset.
#[derive(Parser)]
#[command(name = "texfuse", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML); relative paths inside resolve against its directory.
    #[arg(long, short, global = true, default_value = "texfuse.toml")]
    config: PathBuf,
    /// Worker threads; overrides `workers` in the configuration.
    #[arg(long, short, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Compute and cache every configured descriptor.
    Extract,
    /// Cross-validate one SVM per descriptor and external feature set.
    TrainEval,
    /// Apply the configured fusions to stored scores.
    Fuse,
    /// Write the result file and accuracy tables.
    Report,
    /// extract, train-eval, fuse and report in sequence.
    All,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::DatasetMissing(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = RunConfig::load(&cli.config).and_then(|cfg| {
        if let Some(n) = cli.workers.or(cfg.workers) {
            if n == 0 {
                return Err(Error::Config("workers: must be at least 1".into()));
            }
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                log::warn!("could not size the worker pool: {e}");
            }
        }
        match cli.command {
            Command::Extract => run::extract(&cfg),
            Command::TrainEval => run::train_eval(&cfg),
            Command::Fuse => run::fuse(&cfg),
            Command::Report => run::report(&cfg),
            Command::All => run::all(&cfg),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("texfuse: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
