use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    match opsel::cli::run(opsel::cli::Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("opsel: error: {e}");
            ExitCode::FAILURE
        }
    }
}
