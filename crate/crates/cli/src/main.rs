use std::process::ExitCode;

use clap::Parser;
use spicl_cli::{execute, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("spicl: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
