use std::process::ExitCode;

use berthplan::cli::{execute, Cli};
use clap::Parser;

fn main() -> ExitCode {
    env_logger::init();
    execute(Cli::parse()).into()
}
