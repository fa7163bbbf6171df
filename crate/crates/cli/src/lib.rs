//! Command-line front end: `nsl validate | dulac | theta | tails | limits`.
//!
//! Exit codes: 0 on success, 1 when a computation fails, 2 for invalid
//! configurations or usage. Errors are printed to stderr as one JSON line.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod plot;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde_json::Value;

use crate::config::{Overrides, RunConfig};
use crate::error::{CliError, EXIT_CONFIG};

pub const OUT_ENV: &str = "NSL_OUT";

#[derive(Debug, Parser)]
#[command(name = "nsl", version, about = "Numerical laboratory for planar cubic neutral saddles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (overridden by NSL_OUT).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Seed of the random stream, required by tails and limits.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Upper bound on worker threads.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Also write SVG plots.
    #[arg(long, global = true)]
    pub plot: bool,
    /// Add the quartic remainder to the field.
    #[arg(long, global = true)]
    pub perturbed: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Check the coefficients and print the derived exponents.
    Validate,
    /// Measured Dulac times and exits against their asymptotics.
    Dulac,
    /// Growth of observable integrals along passages.
    Theta,
    /// Tail of the return time under area-uniform entries.
    Tails,
    /// Limit laws of Birkhoff sums in the renewal surrogate.
    Limits,
}

/// Run one command on a resolved configuration.
pub fn execute(command: Command, cfg: &RunConfig) -> Result<Value, CliError> {
    let run = || match command {
        Command::Validate => commands::cmd_validate(cfg),
        Command::Dulac => commands::cmd_dulac(cfg),
        Command::Theta => commands::cmd_theta(cfg),
        Command::Tails => commands::cmd_tails(cfg),
        Command::Limits => commands::cmd_limits(cfg),
    };
    match cfg.threads {
        Some(0) => Err(CliError::usage("InvalidThreads", "--threads must be positive")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::usage("InvalidThreads", e.to_string()))?
            .install(run),
        None => run(),
    }
}

/// Parse arguments, run, print, and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    let overrides = Overrides {
        out: cli.out.clone(),
        seed: cli.seed,
        threads: cli.threads,
        plot: cli.plot,
        perturbed: cli.perturbed,
    };
    let env_out = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
    let result = RunConfig::load(cli.config.as_deref())
        .map(|c| c.resolve(&overrides, env_out))
        .and_then(|cfg| execute(cli.command, &cfg));
    match result {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).unwrap_or_default());
            0
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}
