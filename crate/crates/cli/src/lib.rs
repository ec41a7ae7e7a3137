//! `traitgeo` command-line front end.
//!
//! Every subcommand is deterministic given its flags. Exit codes:
//! 0 success, 2 usage or validation error, 3 numerical failure,
//! 4 judge service failure.

use std::ffi::OsString;
use std::fmt;

use clap::Parser;

pub mod args;
mod commands;
pub mod config;

use args::{Cli, Command};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_EXTERNAL: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(traitgeo::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            CliError::Core(e) if e.is_external() => EXIT_EXTERNAL,
            CliError::Core(_) => EXIT_USAGE,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "UsageError",
            CliError::Core(e) => e.name(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => f.write_str(msg),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<traitgeo::Error> for CliError {
    fn from(e: traitgeo::Error) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub(crate) fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Parses `argv` (program name first), applies any `--config` file and runs
/// the subcommand. Returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let argv = match config::merge_config(argv) {
        Ok(a) => a,
        Err(e) => return report(&e),
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Condition(a) => commands::condition::run(&a),
        Command::Diagnose(a) => commands::diagnose::run(&a),
        Command::Contrast(a) => commands::contrast::run(&a),
        Command::Simulate(a) => commands::simulate::run(&a),
        Command::Judge(a) => commands::judge::run(&a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => report(&e),
    }
}

fn report(e: &CliError) -> i32 {
    eprintln!("error: {}: {e}", e.name());
    e.exit_code()
}
