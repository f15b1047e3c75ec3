//! `driftbench` — runs drift-robustness experiments, generates
//! synthetic drift streams, and re-derives plot-ready tables from
//! stored results.
//!
//! Exit codes: 0 success, 1 configuration error, 2 data error,
//! 3 internal failure. Errors are a single line on standard error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

mod commands;
mod document;
mod error;

use document::{CliDocument, Overrides, Resolved};
use error::{one_line, CliError};

#[derive(Parser)]
#[command(
    name = "driftbench",
    version,
    about = "Drift-robustness and confidence-calibration benchmark",
    after_help = "Relative data paths resolve against $DRIFTBENCH_DATA_DIR when set, \
                  otherwise against the working directory."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML configuration document
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Directory receiving all artifacts [default: driftbench-out]
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,

    /// Run with exactly this seed (collapses the experiment seed list;
    /// for synth, the generation seed)
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Worker threads for parallel (model, seed) cells
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    /// Comma-separated roster subset (svm,dt,knn,rf,nn,nn-ens,nn-mcd)
    #[arg(long, global = true, value_name = "NAMES", value_delimiter = ',')]
    models: Option<Vec<String>>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured experiment and write result artifacts
    Run,
    /// Generate a synthetic drift stream as a canonical CSV dataset
    Synth,
    /// Emit plot-ready tables from an existing result document
    Report {
        /// Result JSON to read [default: <out-dir>/result.json]
        #[arg(value_name = "RESULT")]
        result: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprintln!("{}", CliError::Config(one_line(&e.to_string())));
            return ExitCode::from(1);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let document = match &cli.config {
        Some(path) => document::load_document(path)?,
        None => CliDocument::default(),
    };
    let resolved: Resolved = document::resolve(
        document,
        Overrides {
            out_dir: cli.out_dir,
            seed: cli.seed,
            jobs: cli.jobs,
            models: cli.models,
        },
    )?;
    match cli.command {
        Command::Run => commands::cmd_run(&resolved),
        Command::Synth => commands::cmd_synth(&resolved),
        Command::Report { result } => commands::cmd_report(&resolved, result),
    }
}
