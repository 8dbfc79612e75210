//! Command-line surface of the toolkit: sample files, distance queries,
//! estimator reports, verification suites and figure data.

pub mod args;
pub mod commands;
pub mod error;
pub mod figures;
pub mod formats;
pub mod manifest;
pub mod verify;

use std::ffi::OsString;

use clap::Parser;

pub use error::{CliError, Result, EXIT_FAILED, EXIT_OK, EXIT_RESOURCE, EXIT_USAGE};

/// Environment variable fixing the worker thread count.
pub const THREADS_ENV: &str = "LRP_THREADS";

/// Parses `argv`, runs the command and returns the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match args::Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    match commands::dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?;
    // A pool may already exist when `run` is called twice in one process.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}
