//! Batch front end: `solve`, `descend`, `check` and `corpus`.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
pub use commands::{cmd_check, cmd_corpus_list, cmd_descend, cmd_solve, Overrides};
pub use config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NO_CONVERGENCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "hjdescent",
    version,
    about = "Critical solutions and normalized descent on grids"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Seed for random starts; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for batch descents.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve for the critical value and solution.
    Solve,
    /// Integrate descents from the configured starts.
    Descend,
    /// Run property checks; exit 1 if any fails.
    Check,
    /// List the objective corpus.
    Corpus {
        /// Substring of the names to keep.
        filter: Option<String>,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
}

/// Exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NoConvergence { .. } | Error::Unstable { .. } => EXIT_NO_CONVERGENCE,
        _ => EXIT_CONFIG,
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    if let Command::Corpus { filter, json } = &cli.command {
        print!("{}", cmd_corpus_list(filter.as_deref(), *json));
        return Ok(EXIT_OK);
    }
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config <path> is required".into()))?;
    let config = RunConfig::from_path(path)?;
    let overrides = Overrides {
        output: cli.output.clone(),
        seed: cli.seed,
    };
    let pool = match cli.jobs {
        Some(0) => return Err(Error::Config("--jobs must be positive".into())),
        Some(n) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("cannot start {n} workers: {e}")))?,
        ),
        None => None,
    };
    let work = move || -> Result<i32> {
        match cli.command {
            Command::Solve => cmd_solve(config, &overrides).map(|_| EXIT_OK),
            Command::Descend => cmd_descend(config, &overrides).map(|_| EXIT_OK),
            Command::Check => {
                let reports = cmd_check(config, &overrides)?;
                print!("{}", commands::format_reports(&reports));
                Ok(if reports.iter().all(|r| r.passed) {
                    EXIT_OK
                } else {
                    EXIT_CHECK_FAILED
                })
            }
            Command::Corpus { .. } => unreachable!("handled above"),
        }
    };
    match pool {
        Some(pool) => pool.install(work),
        None => work(),
    }
}
