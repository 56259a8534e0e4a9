//! Command-line harness around `dpxattn-core`: synthetic data, evaluation
//! against exact oracles, an adaptive attacker, and private attention.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod report;

use std::io::Write;

pub use config::Cli;
pub use error::{CliError, Result};

use config::Command;

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Gen(a) => commands::gen::run(a, out).map(drop),
        Command::Eval(a) => commands::eval::run(a, out).map(drop),
        Command::Attack(a) => commands::attack::run(a, out).map(drop),
        Command::Attn(a) => commands::attn::run(a, out).map(drop),
    }
}
