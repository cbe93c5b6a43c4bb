//! `scs`: command-line driver for the singular Cucker-Smale laboratory.
//!
//! Exit codes: 0 success, 1 run failure, 2 configuration error, 3 some
//! sweep cells failed. `SCS_WORKERS` bounds the worker pool.

mod commands;
mod config;
mod error;
mod output;
mod plot;

use std::process::ExitCode;

use clap::Parser;

use crate::commands::{run, Cli};
use crate::error::{CliError, ConfigError};

pub const WORKERS_ENV: &str = "SCS_WORKERS";

fn init_pool() -> Result<(), CliError> {
    let Ok(v) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n >= 1)
        .ok_or_else(|| ConfigError::Invalid(format!("{WORKERS_ENV} must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Run(e.to_string()))
}

fn main() -> ExitCode {
    let argv = match config::expand_args(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Err(e) = init_pool() {
        eprintln!("error: {e}");
        return ExitCode::from(e.exit_code());
    }
    match run(&cli.command) {
        Ok(outcome) => {
            if let commands::Outcome::PartialFailure(k) = outcome {
                eprintln!("{k} run(s) failed; see manifest.txt");
            }
            ExitCode::from(outcome.exit_code())
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
