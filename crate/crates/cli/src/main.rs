//! `threelp`: pseudo-passive timing, gait synthesis, economy sweeps and
//! oracle validation, each writing its outputs and a run manifest to `--out`.
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

/// Failure classes, mapped to process exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags or config: exit 2.
    #[error("{0}")]
    Usage(String),
    /// The computation ran but did not succeed: exit 1.
    #[error("{0}")]
    Failed(String),
}

impl From<threelp::Error> for CliError {
    fn from(e: threelp::Error) -> Self {
        use threelp::Error as E;
        match e {
            E::Config(_) | E::UnknownConfigKey(_) | E::InvalidParam { .. } | E::InvalidTiming(_) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Failed(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failed(format!("i/o error: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Relax(a) => commands::relax::run(&cli.common, a),
        Command::Gait(a) => commands::gait::run(&cli.common, a),
        Command::Sweep(a) => commands::sweep::run(&cli.common, a),
        Command::Validate(a) => commands::validate::run(&cli.common, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Failed(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
