mod args;
mod commands;
mod format;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Estimate(a) => commands::estimate(a),
        Command::Placebo(a) => commands::placebo(a),
        Command::SpecTest(a) => commands::spec_test_cmd(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Coverage(a) => commands::coverage(a),
        Command::Rate(a) => commands::rate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
