use std::process::ExitCode;

use clap::Parser;
use retrotrack::cli::{execute, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    execute(Cli::parse())
}
