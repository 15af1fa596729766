use std::process::ExitCode;

use mlc_core::experiments::{parse_cli, run, ExperimentError};

fn main() -> ExitCode {
    let result = parse_cli(std::env::args_os()).and_then(|config| run(&config));
    match result {
        Ok(path) => {
            println!("wrote {}", path.display());
            ExitCode::SUCCESS
        }
        Err(ExperimentError::Info(text)) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(ExperimentError::Usage(text)) => {
            eprintln!("{text}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
