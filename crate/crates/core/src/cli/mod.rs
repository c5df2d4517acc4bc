//! Command-line front end: chip configuration, the chip pipeline, spectrum
//! file formats and the `purcell` subcommands.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 numeric failure,
//! 4 I/O error. `PURCELL_THREADS` sets the worker thread count.

pub mod commands;
pub mod config;
pub mod report;
pub mod spectrum_csv;
pub mod touchstone;

use std::ffi::OsString;

use clap::Parser;

use crate::{Error, Result};

pub const THREADS_ENV: &str = "PURCELL_THREADS";

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Error::config(
            THREADS_ENV,
            format!("expected a positive integer, got `{v}`"),
        )
    })?;
    // A pool may already exist when called twice in one process; keep it.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

/// Parse arguments, run, and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match commands::Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match configure_threads().and_then(|_| commands::execute(cli)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
