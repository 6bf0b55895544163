use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    abp_cli::run(abp_cli::Cli::parse())
}
