//! `singheat` — batch front end for the boundary-control laboratory.
//!
//! Exit status: 0 on success, 1 when `verify` reports a failing check,
//! 2 for invalid configuration, 3 for numerical guards and I/O failures.

mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;

use config::{Command, Flags, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "singheat", version, about = "Moment-method control of the heat equation with an inverse-square potential")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = RunConfig::resolve(cli.command, cli.flags).and_then(|cfg| commands::run(&cfg));
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("singheat: {err}");
            ExitCode::from(if err.is_validation() { 2 } else { 3 })
        }
    }
}
